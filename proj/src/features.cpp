#include "mpf/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mpf/errors.hpp"
#include "mpf/panel_io.hpp"
#include "mpf/preprocess.hpp"
#include "mpf/stats.hpp"

namespace mpf {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// FNV-1a over a canonical string rendering
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// series values with short gaps LOCF-filled; NaN where unfillable
std::vector<double> filled_values(const Series& s, int cap) {
    Series tmp = s;
    impute_locf(tmp, cap);
    return tmp.values;
}

}  // namespace

std::uint64_t FeatureSpec::hash() const {
    nlohmann::json j;
    to_json(j, *this);
    return fnv1a(j.dump());
}

Series log_transform(const Series& s) {
    Series out = s;
    for (size_t t = 0; t < s.size(); ++t) {
        if (!s.observed[t]) continue;
        if (!(s.values[t] > 0.0))
            throw NonPositiveValue("non-positive value at " + s.quarter_at(t).str() + " in " +
                                   s.key.str());
        out.values[t] = std::log(s.values[t]);
    }
    return out;
}

std::vector<NamedColumn> lag_features(const Series& s, const std::vector<int>& lags) {
    std::vector<NamedColumn> out;
    for (int lag : lags) {
        if (lag <= 0) throw InvalidConfig("lags must be positive");
        NamedColumn col;
        col.name = "lag" + std::to_string(lag);
        col.values.assign(s.size(), kNan);
        for (size_t t = static_cast<size_t>(lag); t < s.size(); ++t)
            col.values[t] = s.values[t - lag];
        out.push_back(std::move(col));
    }
    return out;
}

NamedColumn yoy_change(const Series& s) {
    NamedColumn col;
    col.name = "yoy";
    col.values.assign(s.size(), kNan);
    for (size_t t = 4; t < s.size(); ++t) col.values[t] = s.values[t] - s.values[t - 4];
    return col;
}

NamedColumn qoq_change(const Series& s) {
    NamedColumn col;
    col.name = "qoq";
    col.values.assign(s.size(), kNan);
    for (size_t t = 1; t < s.size(); ++t) col.values[t] = s.values[t] - s.values[t - 1];
    return col;
}

std::vector<NamedColumn> rolling_stats(const Series& s, int k) {
    if (k < 2) throw InvalidConfig("rolling window needs k >= 2");
    NamedColumn ma, sd;
    ma.name = "ma" + std::to_string(k);
    sd.name = "sd" + std::to_string(k);
    ma.values.assign(s.size(), kNan);
    sd.values.assign(s.size(), kNan);
    for (size_t t = static_cast<size_t>(k) - 1; t < s.size(); ++t) {
        double m = 0.0;
        for (int i = 0; i < k; ++i) m += s.values[t - i];
        m /= k;
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
            double d = s.values[t - i] - m;
            acc += d * d;
        }
        ma.values[t] = m;
        sd.values[t] = std::sqrt(acc / (k - 1));
    }
    return {std::move(ma), std::move(sd)};
}

std::vector<NamedColumn> quarter_dummy_columns(const std::vector<Quarter>& axis) {
    std::vector<NamedColumn> out(4);
    for (int k = 0; k < 4; ++k) {
        out[k].name = "q" + std::to_string(k + 1);
        out[k].values.assign(axis.size(), 0.0);
    }
    for (size_t t = 0; t < axis.size(); ++t) out[axis[t].q - 1].values[t] = 1.0;
    return out;
}

Series ppi_cluster_aggregate(const Panel& panel, const PpiCluster& cluster, int impute_cap) {
    if (cluster.members.empty()) throw EmptyCluster("cluster '" + cluster.name + "' is empty");
    std::vector<std::vector<double>> members;
    for (const auto& key : cluster.members)
        members.push_back(filled_values(panel.get(key), impute_cap));

    Series out;
    out.key = {SeriesKind::Ppi, "cluster:" + cluster.name};
    out.start = panel.first_quarter();
    out.values.assign(panel.length(), kNan);
    out.observed.assign(panel.length(), false);
    for (size_t t = 0; t < panel.length(); ++t) {
        double sum = 0.0;
        bool ok = true;
        for (const auto& m : members) {
            if (!std::isfinite(m[t])) {
                ok = false;
                break;
            }
            sum += m[t];
        }
        if (ok) {
            out.values[t] = sum / static_cast<double>(members.size());
            out.observed[t] = true;
        }
    }
    return out;
}

std::optional<size_t> FeatureMatrix::row_index_of(const Quarter& q) const {
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].quarter == q) return i;
    return std::nullopt;
}

int FeatureMatrix::column_index(const std::string& name) const {
    for (size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return static_cast<int>(i);
    return -1;
}

Eigen::MatrixXd FeatureMatrix::x_matrix() const {
    Eigen::MatrixXd X(rows.size(), column_names.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < column_names.size(); ++j) X(i, j) = rows[i].x[j];
    return X;
}

Eigen::VectorXd FeatureMatrix::y_vector() const {
    Eigen::VectorXd y(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) y(i) = rows[i].target;
    return y;
}

FeatureMatrix FeatureMatrix::subset(const std::vector<std::string>& columns) const {
    FeatureMatrix out;
    out.target_key = target_key;
    out.first_valid = first_valid;
    out.as_of = as_of;
    out.spec_hash = spec_hash;
    out.column_names = columns;
    std::vector<int> idx;
    for (const auto& name : columns) {
        int i = column_index(name);
        if (i < 0) throw DataError("no column '" + name + "' in feature matrix");
        idx.push_back(i);
    }
    for (const auto& row : rows) {
        FeatureRow r;
        r.quarter = row.quarter;
        r.target = row.target;
        for (int i : idx) r.x.push_back(row.x[static_cast<size_t>(i)]);
        out.rows.push_back(std::move(r));
    }
    return out;
}

FeatureMatrix FeatureMatrix::rows_through(const Quarter& q) const {
    FeatureMatrix out = *this;
    out.rows.clear();
    for (const auto& row : rows)
        if (row.quarter <= q) out.rows.push_back(row);
    return out;
}

void FeatureMatrix::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "# target=" << target_key.str() << " as_of=" << as_of.str() << " spec_hash="
        << spec_hash << '\n';
    out << "quarter,target";
    for (const auto& c : column_names) out << ',' << csv_quote(c);
    out << '\n';
    for (const auto& row : rows) {
        out << row.quarter.str() << ',' << format_double(row.target);
        for (double v : row.x) out << ',' << format_double(v);
        out << '\n';
    }
}

ScreeningResult screen_features(const FeatureMatrix& m, int top_m) {
    if (top_m < 0) throw InvalidConfig("top_m must be >= 0");
    std::vector<double> y(m.rows.size());
    for (size_t i = 0; i < m.rows.size(); ++i) y[i] = m.rows[i].target;

    ScreeningResult res;
    std::vector<std::string> exog;
    for (const auto& name : m.column_names)
        if (name.find(':') != std::string::npos) exog.push_back(name);

    // metrics per exogenous column
    for (const auto& name : exog) {
        int ci = m.column_index(name);
        std::vector<double> col(m.rows.size());
        for (size_t i = 0; i < m.rows.size(); ++i) col[i] = m.rows[i].x[static_cast<size_t>(ci)];
        ScreeningEntry e;
        e.column = name;
        bool constant = true;
        for (size_t i = 1; i < col.size(); ++i)
            if (col[i] != col[0]) {
                constant = false;
                break;
            }
        if (constant || col.size() < 2) {
            e.degenerate = true;
        } else {
            e.abs_pearson = std::fabs(stats::pearson(col, y));
            e.abs_spearman = std::fabs(stats::spearman(col, y));
            e.ssr = stats::ols_univariate(col, y).ssr;
        }
        res.table.push_back(std::move(e));
    }

    // top-m per metric, ties broken lexicographically by column name
    auto top_set = [&](auto better) {
        std::vector<const ScreeningEntry*> live;
        for (const auto& e : res.table)
            if (!e.degenerate) live.push_back(&e);
        std::sort(live.begin(), live.end(), [&](const ScreeningEntry* a, const ScreeningEntry* b) {
            if (better(*a, *b)) return true;
            if (better(*b, *a)) return false;
            return a->column < b->column;
        });
        std::set<std::string> keep;
        for (size_t i = 0; i < live.size() && i < static_cast<size_t>(top_m); ++i)
            keep.insert(live[i]->column);
        return keep;
    };
    auto by_pearson = top_set([](const ScreeningEntry& a, const ScreeningEntry& b) {
        return a.abs_pearson > b.abs_pearson;
    });
    auto by_spearman = top_set([](const ScreeningEntry& a, const ScreeningEntry& b) {
        return a.abs_spearman > b.abs_spearman;
    });
    auto by_ssr = top_set(
        [](const ScreeningEntry& a, const ScreeningEntry& b) { return a.ssr < b.ssr; });

    std::set<std::string> retained_exog;
    for (const auto& s : {by_pearson, by_spearman, by_ssr})
        retained_exog.insert(s.begin(), s.end());

    for (auto& e : res.table) e.retained = retained_exog.count(e.column) > 0;
    for (const auto& name : m.column_names) {
        bool is_exog = name.find(':') != std::string::npos;
        if (!is_exog || retained_exog.count(name)) res.retained.push_back(name);
    }
    return res;
}

std::vector<std::string> select_exog_by_diff_correlation(const FeatureMatrix& m, int top) {
    if (top < 0) throw InvalidConfig("top must be >= 0");
    std::vector<double> dy;
    for (size_t i = 1; i < m.rows.size(); ++i)
        dy.push_back(m.rows[i].target - m.rows[i - 1].target);
    std::vector<std::pair<double, std::string>> ranked;
    for (size_t c = 0; c < m.column_names.size(); ++c) {
        if (m.column_names[c].find(':') == std::string::npos) continue;
        std::vector<double> dx;
        for (size_t i = 1; i < m.rows.size(); ++i)
            dx.push_back(m.rows[i].x[c] - m.rows[i - 1].x[c]);
        double r = 0.0;
        try {
            r = std::fabs(stats::pearson(dx, dy));
        } catch (const Error&) {
            continue;  // constant column
        }
        ranked.push_back({-r, m.column_names[c]});
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> cols;
    for (size_t i = 0; i < ranked.size() && static_cast<int>(cols.size()) < top; ++i)
        cols.push_back(ranked[i].second);
    std::sort(cols.begin(), cols.end());
    return cols;
}

namespace {

// transform stack shared by the target and every exogenous series
struct TransformedColumns {
    std::vector<NamedColumn> cols;
    int min_history = 0;  // quarters of history a row needs before it is valid
};

TransformedColumns transforms_of(const Series& filled, const FeatureSpec& spec,
                                 const std::string& prefix, bool include_level) {
    TransformedColumns out;
    auto add = [&](NamedColumn c) {
        c.name = prefix.empty() ? c.name : prefix + ":" + c.name;
        out.cols.push_back(std::move(c));
    };

    if (include_level) {
        NamedColumn lvl;
        lvl.name = "lvl";
        lvl.values = filled.values;
        add(std::move(lvl));
    }
    for (auto& c : lag_features(filled, spec.lag_set)) add(std::move(c));
    if (!spec.lag_set.empty())
        out.min_history = std::max(out.min_history,
                                   *std::max_element(spec.lag_set.begin(), spec.lag_set.end()));
    if (spec.yoy) {
        add(qoq_change(filled));
        add(yoy_change(filled));
        out.min_history = std::max(out.min_history, 4);
    }
    for (int k : spec.rolling_windows) {
        for (auto& c : rolling_stats(filled, k)) add(std::move(c));
        out.min_history = std::max(out.min_history, k - 1);
    }
    return out;
}

}  // namespace

FeatureMatrix build_matrix(const Panel& panel, const SeriesKey& target_key,
                           const FeatureSpec& spec, const Quarter& as_of) {
    if (!panel.has(target_key)) throw DataError("target " + target_key.str() + " not in panel");
    if (as_of < panel.first_quarter() || as_of > panel.last_quarter())
        throw InsufficientHistory("as_of " + as_of.str() + " outside panel axis");

    // truncation first: everything below sees only data <= as_of
    Panel p = panel.truncated_after(as_of);

    auto prepare = [&](const Series& raw) {
        Series s = raw;
        impute_locf(s, spec.impute_cap);
        if (spec.use_log) s = log_transform(s);
        return s;
    };

    Series target = prepare(p.get(target_key));

    std::vector<NamedColumn> all_cols;
    int min_history = 0;
    {
        auto t = transforms_of(target, spec, "", /*include_level=*/false);
        min_history = std::max(min_history, t.min_history);
        for (auto& c : t.cols) all_cols.push_back(std::move(c));
    }
    if (spec.quarter_dummies)
        for (auto& c : quarter_dummy_columns(p.quarters())) all_cols.push_back(std::move(c));

    if (spec.augmented) {
        for (const auto& cluster : spec.ppi_clusters) {
            Series agg = prepare(ppi_cluster_aggregate(p, cluster, spec.impute_cap));
            auto t = transforms_of(agg, spec, "ppi:" + cluster.name, /*include_level=*/true);
            min_history = std::max(min_history, t.min_history);
            for (auto& c : t.cols) all_cols.push_back(std::move(c));
        }
        for (const auto& key : spec.macro_keys) {
            Series m = prepare(p.get(key));
            auto t = transforms_of(m, spec, "macro:" + key.code, /*include_level=*/true);
            min_history = std::max(min_history, t.min_history);
            for (auto& c : t.cols) all_cols.push_back(std::move(c));
        }
    }

    FeatureMatrix out;
    out.target_key = target_key;
    out.as_of = as_of;
    out.spec_hash = spec.hash();
    for (const auto& c : all_cols) out.column_names.push_back(c.name);

    size_t first_row = static_cast<size_t>(min_history);
    if (first_row >= p.length())
        throw InsufficientHistory("no quarter has " + std::to_string(min_history) +
                                  " quarters of history by " + as_of.str());
    bool have_first_valid = false;
    for (size_t t = first_row; t < p.length(); ++t) {
        FeatureRow row;
        row.quarter = p.quarters()[t];
        row.target = target.values[t];
        bool ok = std::isfinite(row.target);
        for (const auto& c : all_cols) {
            row.x.push_back(c.values[t]);
            ok = ok && std::isfinite(c.values[t]);
        }
        if (!ok) continue;  // masked cluster quarter or unfillable gap
        if (!have_first_valid) {
            out.first_valid = row.quarter;
            have_first_valid = true;
        }
        out.rows.push_back(std::move(row));
    }
    if (!have_first_valid)
        throw InsufficientHistory("no valid feature rows by " + as_of.str());

    if (spec.screening) {
        auto res = screen_features(out, *spec.screening);
        out = out.subset(res.retained);
    }
    return out;
}

void to_json(nlohmann::json& j, const FeatureSpec& spec) {
    j = nlohmann::json{{"use_log", spec.use_log},
                       {"lag_set", spec.lag_set},
                       {"yoy", spec.yoy},
                       {"rolling_windows", spec.rolling_windows},
                       {"quarter_dummies", spec.quarter_dummies},
                       {"lookback_L", spec.lookback_L},
                       {"augmented", spec.augmented},
                       {"impute_cap", spec.impute_cap}};
    if (spec.screening) j["screening"] = *spec.screening;
    if (!spec.ppi_clusters.empty()) {
        nlohmann::json clusters = nlohmann::json::array();
        for (const auto& c : spec.ppi_clusters) {
            nlohmann::json members = nlohmann::json::array();
            for (const auto& k : c.members) members.push_back(k.code);
            clusters.push_back({{"name", c.name}, {"members", members}});
        }
        j["ppi_clusters"] = clusters;
    }
    if (!spec.macro_keys.empty()) {
        nlohmann::json keys = nlohmann::json::array();
        for (const auto& k : spec.macro_keys) keys.push_back(k.code);
        j["macro_keys"] = keys;
    }
}

void from_json(const nlohmann::json& j, FeatureSpec& spec) {
    spec = FeatureSpec{};
    spec.use_log = j.value("use_log", spec.use_log);
    if (j.contains("lag_set")) spec.lag_set = j["lag_set"].get<std::vector<int>>();
    spec.yoy = j.value("yoy", spec.yoy);
    if (j.contains("rolling_windows"))
        spec.rolling_windows = j["rolling_windows"].get<std::vector<int>>();
    spec.quarter_dummies = j.value("quarter_dummies", spec.quarter_dummies);
    spec.lookback_L = j.value("lookback_L", spec.lookback_L);
    spec.augmented = j.value("augmented", spec.augmented);
    spec.impute_cap = j.value("impute_cap", spec.impute_cap);
    if (j.contains("screening") && !j["screening"].is_null())
        spec.screening = j["screening"].get<int>();
    if (j.contains("ppi_clusters")) {
        for (const auto& c : j["ppi_clusters"]) {
            PpiCluster cluster;
            cluster.name = c.at("name").get<std::string>();
            for (const auto& code : c.at("members"))
                cluster.members.push_back({SeriesKind::Ppi, code.get<std::string>()});
            spec.ppi_clusters.push_back(std::move(cluster));
        }
    }
    if (j.contains("macro_keys"))
        for (const auto& code : j["macro_keys"])
            spec.macro_keys.push_back({SeriesKind::Macro, code.get<std::string>()});
}

}  // namespace mpf
