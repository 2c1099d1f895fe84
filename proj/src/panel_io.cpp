#include "mpf/panel_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mpf/errors.hpp"

namespace mpf {

std::string format_double(double v) {
    // shortest representation that round-trips exactly
    char buf[40];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = std::strtod(buf, nullptr);
        if (back == v) return buf;
    }
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

Panel load_panel(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw SchemaError(path + ": empty file");
    if (lines[0] != "kind,code,quarter,value")
        throw SchemaError(path + ":1: header must be exactly 'kind,code,quarter,value'");

    struct Point {
        Quarter q;
        double v;
    };
    std::map<SeriesKey, std::vector<Point>> by_key;
    std::vector<SeriesKey> order;
    std::set<std::int64_t> quarters_seen;

    for (size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto loc = [&](const std::string& what, int col) {
            std::ostringstream os;
            os << path << ":" << (ln + 1) << ": column " << col << ": " << what;
            return os.str();
        };
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 4) throw SchemaError(loc("expected 4 fields", 1));
        SeriesKey key;
        try {
            key.kind = series_kind_from_string(fields[0]);
        } catch (const SchemaError& e) {
            throw SchemaError(loc(e.what(), 1));
        }
        key.code = fields[1];
        if (key.code.empty()) throw SchemaError(loc("empty code", 2));
        if (key.is_csi() && !valid_csi_code(key.code))
            throw SchemaError(loc("CSI code must be six decimal digits", 2));
        Quarter q;
        try {
            q = parse_quarter(fields[2]);
        } catch (const SchemaError& e) {
            throw SchemaError(loc(e.what(), 3));
        }
        char* end = nullptr;
        double v = std::strtod(fields[3].c_str(), &end);
        if (end == fields[3].c_str() || *end != '\0')
            throw SchemaError(loc("invalid decimal '" + fields[3] + "'", 4));

        auto it = by_key.find(key);
        if (it == by_key.end()) {
            order.push_back(key);
            it = by_key.emplace(key, std::vector<Point>{}).first;
        }
        for (const auto& pt : it->second)
            if (pt.q == q) throw DuplicateKey(loc("duplicate (key, quarter) row", 3));
        it->second.push_back({q, v});
        quarters_seen.insert(q.index());
    }
    if (by_key.empty()) throw SchemaError(path + ": no data rows");

    // union axis must be gap-free
    std::int64_t lo = *quarters_seen.begin();
    std::int64_t hi = *quarters_seen.rbegin();
    for (std::int64_t i = lo; i <= hi; ++i)
        if (!quarters_seen.count(i))
            throw NonContiguousAxis(path + ": no observations anywhere at " +
                                    Quarter::from_index(i).str());

    std::vector<Series> series;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& key : order) {
        auto pts = by_key[key];
        std::sort(pts.begin(), pts.end(),
                  [](const Point& a, const Point& b) { return a.q < b.q; });
        Series s;
        s.key = key;
        s.start = pts.front().q;
        size_t n = static_cast<size_t>(quarters_between(pts.front().q, pts.back().q)) + 1;
        s.values.assign(n, nan);
        s.observed.assign(n, false);
        for (const auto& pt : pts) {
            size_t i = static_cast<size_t>(quarters_between(s.start, pt.q));
            s.values[i] = pt.v;
            s.observed[i] = true;
        }
        series.push_back(std::move(s));
    }
    return Panel::build(std::move(series));
}

void save_panel(const Panel& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "kind,code,quarter,value\n";
    for (const auto& s : p.series()) {
        for (size_t t = 0; t < s.size(); ++t) {
            if (!s.observed[t]) continue;
            out << to_string(s.key.kind) << ',' << csv_quote(s.key.code) << ','
                << s.quarter_at(t).str() << ',' << format_double(s.values[t]) << '\n';
        }
    }
}

std::string meta_sidecar_path(const std::string& panel_path) {
    auto dot = panel_path.rfind('.');
    std::string stem = dot == std::string::npos ? panel_path : panel_path.substr(0, dot);
    return stem + "_meta.json";
}

void save_panel_meta(const PanelMeta& meta, const std::string& path) {
    nlohmann::json j;
    j["base_quarter"] = meta.base.str();
    j["cci_adjusted"] = meta.cci_adjusted;
    j["excluded_rows"] = meta.excluded_rows;
    j["kept_rows"] = meta.kept_rows;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::optional<PanelMeta> load_panel_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    nlohmann::json j;
    in >> j;
    PanelMeta meta;
    meta.base = parse_quarter(j.at("base_quarter").get<std::string>());
    meta.cci_adjusted = j.value("cci_adjusted", false);
    meta.excluded_rows = j.value("excluded_rows", 0);
    meta.kept_rows = j.value("kept_rows", 0);
    return meta;
}

std::vector<CatalogRow> load_catalog(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "division,section,title,description")
        throw SchemaError(path + ": header must be 'division,section,title,description'");
    std::vector<CatalogRow> rows;
    for (size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 4)
            throw SchemaError(path + ":" + std::to_string(ln + 1) + ": expected 4 fields");
        CatalogRow row;
        row.division = fields[0];
        row.section = fields[1];
        row.title = fields[2];
        row.description = fields[3];
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_catalog(const std::vector<CatalogRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "division,section,title,description\n";
    for (const auto& r : rows)
        out << csv_quote(r.division) << ',' << csv_quote(r.section) << ','
            << csv_quote(r.title) << ',' << csv_quote(r.description) << '\n';
}

std::vector<std::string> load_taxonomy(const std::string& path) {
    auto lines = read_lines(path);
    std::vector<std::string> keywords;
    for (auto line : lines) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto b = line.find_first_not_of(" \t");
        auto e = line.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        keywords.push_back(line.substr(b, e - b + 1));
    }
    return keywords;
}

}  // namespace mpf
