#include "mpf/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "mpf/errors.hpp"

namespace mpf {

Series rebase(const Series& s, const Quarter& base, double base_value) {
    auto i = s.index_of(base);
    if (!i || !s.observed[*i])
        throw MissingBase("series " + s.key.str() + " unobserved at base " + base.str());
    double b = s.values[*i];
    if (!(b > 0.0))
        throw NonPositiveBase("series " + s.key.str() + " non-positive at base " + base.str());
    Series out = s;
    if (b == base_value) return out;  // already on the requested base; keeps idempotence exact
    // divide first: the base slot becomes base_value * (b / b) = base_value exactly
    for (size_t t = 0; t < out.values.size(); ++t)
        if (out.observed[t]) out.values[t] = base_value * (s.values[t] / b);
    return out;
}

Series cci_adjust(const Series& s, const Series& cci) {
    if (cci.start != s.start || cci.size() != s.size())
        throw MisalignedAxis("cci axis differs from " + s.key.str());
    Series out = s;
    for (size_t t = 0; t < s.values.size(); ++t) {
        if (!s.observed[t]) continue;
        if (!cci.observed[t] || !(cci.values[t] > 0.0))
            throw NonPositiveCci("cci missing or non-positive at " + s.quarter_at(t).str());
        out.values[t] = s.values[t] / (cci.values[t] / 100.0);
    }
    return out;
}

namespace {

std::string lowered(const std::string& in) {
    std::string out = in;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::vector<CatalogRow> exclude_services(const std::vector<CatalogRow>& rows,
                                         const std::vector<std::string>& taxonomy) {
    if (taxonomy.empty()) throw EmptyInput("service taxonomy is empty");
    std::vector<std::string> needles;
    needles.reserve(taxonomy.size());
    for (const auto& k : taxonomy) needles.push_back(lowered(k));

    std::vector<CatalogRow> out;
    for (const auto& row : rows) {
        if (row.division == "01" || row.division == "02") continue;
        std::string text = lowered(row.title + " " + row.description);
        bool service = std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
            return !n.empty() && text.find(n) != std::string::npos;
        });
        if (service) continue;
        CatalogRow kept = row;
        kept.is_material = true;
        out.push_back(std::move(kept));
    }
    return out;
}

Series align_monthly_to_quarterly(const MonthlyInput& in, const SeriesKey& key) {
    if (in.values.empty()) throw EmptyInput("no monthly values");
    if (in.start_month < 1 || in.start_month > 12) throw DataError("start month outside 1..12");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    // month index counted from 0000-01
    std::int64_t m0 = static_cast<std::int64_t>(in.start_year) * 12 + (in.start_month - 1);
    std::int64_t m1 = m0 + static_cast<std::int64_t>(in.values.size()) - 1;
    std::int64_t q0 = m0 / 3;
    std::int64_t q1 = m1 / 3;

    Series out;
    out.key = key;
    out.start = Quarter::from_index(q0);
    size_t nq = static_cast<size_t>(q1 - q0 + 1);
    out.values.assign(nq, nan);
    out.observed.assign(nq, false);

    std::vector<double> sums(nq, 0.0);
    std::vector<int> counts(nq, 0);
    for (size_t i = 0; i < in.values.size(); ++i) {
        if (!in.observed.empty() && !in.observed[i]) continue;
        std::int64_t q = (m0 + static_cast<std::int64_t>(i)) / 3 - q0;
        sums[static_cast<size_t>(q)] += in.values[i];
        counts[static_cast<size_t>(q)] += 1;
    }
    bool any = false;
    for (size_t q = 0; q < nq; ++q) {
        if (counts[q] > 0) {
            out.values[q] = sums[q] / counts[q];
            out.observed[q] = true;
            any = true;
        }
    }
    if (!any) throw EmptyInput("no observed months");
    return out;
}

std::pair<Panel, Panel> train_test_split(const Panel& p, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidConfig("train_fraction must be in (0, 1)");
    size_t T = p.length();
    if (T < 4) throw TooShort("panel too short to split");
    size_t n_train = static_cast<size_t>(std::floor(static_cast<double>(T) * train_fraction));
    if (n_train == 0 || n_train >= T) throw TooShort("split leaves an empty block");
    Quarter split_last = p.quarters()[n_train - 1];
    Panel train = p.slice(p.first_quarter(), split_last);
    Panel test = p.slice(split_last.next(), p.last_quarter());
    return {std::move(train), std::move(test)};
}

bool impute_locf(Series& s, int max_run) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    bool complete = true;
    size_t t = 0;
    while (t < s.size() && !s.observed[t]) {  // leading gap has nothing to carry
        s.values[t] = nan;
        ++t;
    }
    if (t > 0) complete = false;
    if (t == s.size()) return false;

    double last = s.values[t];
    while (t < s.size()) {
        if (s.observed[t]) {
            last = s.values[t];
            ++t;
            continue;
        }
        size_t run_end = t;
        while (run_end < s.size() && !s.observed[run_end]) ++run_end;
        size_t run = run_end - t;
        if (run <= static_cast<size_t>(max_run)) {
            for (size_t i = t; i < run_end; ++i) s.values[i] = last;  // stays flagged unobserved
        } else {
            for (size_t i = t; i < run_end; ++i) s.values[i] = nan;  // run too long
            complete = false;
        }
        t = run_end;
    }
    return complete;
}

}  // namespace mpf
