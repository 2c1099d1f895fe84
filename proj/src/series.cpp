#include "mpf/series.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "mpf/errors.hpp"

namespace mpf {

std::string to_string(SeriesKind k) {
    switch (k) {
        case SeriesKind::CsiSection: return "csi";
        case SeriesKind::Ppi: return "ppi";
        case SeriesKind::Macro: return "macro";
        case SeriesKind::CityCostIndex: return "cci";
    }
    return "?";
}

SeriesKind series_kind_from_string(const std::string& s) {
    if (s == "csi") return SeriesKind::CsiSection;
    if (s == "ppi") return SeriesKind::Ppi;
    if (s == "macro") return SeriesKind::Macro;
    if (s == "cci") return SeriesKind::CityCostIndex;
    throw SchemaError("unknown series kind '" + s + "' (expected csi|ppi|macro|cci)");
}

bool valid_csi_code(const std::string& code) {
    if (code.size() != 6) return false;
    return std::all_of(code.begin(), code.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

double Series::at(const Quarter& q) const {
    auto i = index_of(q);
    if (!i) throw DataError("quarter " + q.str() + " outside axis of " + key.str());
    return values[*i];
}

Series Series::truncated_after(const Quarter& q) const {
    auto d = quarters_between(start, q);
    Series out;
    out.key = key;
    out.start = start;
    if (d < 0) return out;
    size_t n = std::min(static_cast<size_t>(d + 1), values.size());
    out.values.assign(values.begin(), values.begin() + n);
    out.observed.assign(observed.begin(), observed.begin() + n);
    return out;
}

Panel Panel::build(std::vector<Series> series) {
    if (series.empty()) throw EmptyInput("panel needs at least one series");
    std::set<SeriesKey> seen;
    Quarter lo = series.front().start;
    Quarter hi = series.front().start;
    for (const auto& s : series) {
        if (s.values.size() != s.observed.size())
            throw DataError("values/observed length mismatch for " + s.key.str());
        if (s.values.empty()) throw EmptyInput("empty series " + s.key.str());
        if (!seen.insert(s.key).second) throw DuplicateKey("duplicate series key " + s.key.str());
        lo = std::min(lo, s.start);
        hi = std::max(hi, s.quarter_at(s.size() - 1));
    }
    size_t axis_len = static_cast<size_t>(quarters_between(lo, hi)) + 1;

    Panel p;
    p.quarters_.reserve(axis_len);
    for (size_t i = 0; i < axis_len; ++i) p.quarters_.push_back(lo.plus(static_cast<std::int64_t>(i)));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto& s : series) {
        Series aligned;
        aligned.key = s.key;
        aligned.start = lo;
        aligned.values.assign(axis_len, nan);
        aligned.observed.assign(axis_len, false);
        size_t offset = static_cast<size_t>(quarters_between(lo, s.start));
        for (size_t i = 0; i < s.size(); ++i) {
            aligned.values[offset + i] = s.values[i];
            aligned.observed[offset + i] = s.observed[i];
        }
        p.series_.push_back(std::move(aligned));
    }
    return p;
}

bool Panel::has(const SeriesKey& key) const { return find(key) != nullptr; }

const Series* Panel::find(const SeriesKey& key) const {
    for (const auto& s : series_)
        if (s.key == key) return &s;
    return nullptr;
}

const Series& Panel::get(const SeriesKey& key) const {
    const Series* s = find(key);
    if (!s) throw DataError("no series " + key.str() + " in panel");
    return *s;
}

std::vector<SeriesKey> Panel::keys() const {
    std::vector<SeriesKey> out;
    out.reserve(series_.size());
    for (const auto& s : series_) out.push_back(s.key);
    return out;
}

std::vector<SeriesKey> Panel::keys_of(SeriesKind kind) const {
    std::vector<SeriesKey> out;
    for (const auto& s : series_)
        if (s.key.kind == kind) out.push_back(s.key);
    return out;
}

Panel Panel::with_series(Series s) const {
    if (s.start != quarters_.front() || s.size() != quarters_.size())
        throw MisalignedAxis("series " + s.key.str() + " does not cover the panel axis");
    Panel out = *this;
    for (auto& existing : out.series_) {
        if (existing.key == s.key) {
            existing = std::move(s);
            return out;
        }
    }
    out.series_.push_back(std::move(s));
    return out;
}

Panel Panel::truncated_after(const Quarter& q) const { return slice(first_quarter(), q); }

Panel Panel::slice(const Quarter& from, const Quarter& to) const {
    if (from > to) throw DataError("empty slice " + from.str() + ".." + to.str());
    Quarter lo = std::max(from, first_quarter());
    Quarter hi = std::min(to, last_quarter());
    if (lo > hi) throw DataError("slice outside axis");
    size_t a = static_cast<size_t>(quarters_between(first_quarter(), lo));
    size_t b = static_cast<size_t>(quarters_between(first_quarter(), hi));

    Panel out;
    out.base = base;
    out.quarters_.assign(quarters_.begin() + a, quarters_.begin() + b + 1);
    for (const auto& s : series_) {
        Series cut;
        cut.key = s.key;
        cut.start = lo;
        cut.values.assign(s.values.begin() + a, s.values.begin() + b + 1);
        cut.observed.assign(s.observed.begin() + a, s.observed.begin() + b + 1);
        out.series_.push_back(std::move(cut));
    }
    return out;
}

}  // namespace mpf
