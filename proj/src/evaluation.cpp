#include "mpf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mpf/errors.hpp"
#include "mpf/rng.hpp"
#include "mpf/stats.hpp"

namespace mpf {

MetricReport metrics(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ShapeMismatch("metrics inputs differ in length");
    if (actual.empty()) throw EmptyInput("metrics need n >= 1");

    MetricReport rep;
    rep.n = static_cast<int>(actual.size());

    double sse = 0.0;
    double mape_sum = 0.0;
    int mape_n = 0;
    for (size_t i = 0; i < actual.size(); ++i) {
        double e = actual[i] - predicted[i];
        sse += e * e;
        if (actual[i] != 0.0) {
            mape_sum += std::fabs(e) / std::fabs(actual[i]);
            ++mape_n;
        } else {
            ++rep.mape_skipped;
        }
    }
    rep.rmse = std::sqrt(sse / static_cast<double>(actual.size()));
    rep.mape = mape_n > 0 ? 100.0 * mape_sum / mape_n : 0.0;

    double abar = stats::mean(actual);
    double sst = 0.0;
    for (double a : actual) sst += (a - abar) * (a - abar);
    if (sst == 0.0) {
        rep.r2_defined = false;
        rep.r2 = 0.0;
    } else {
        rep.r2 = 1.0 - sse / sst;
    }
    return rep;
}

DmResult dm_test(std::span<const double> errors_a, std::span<const double> errors_b, int h,
                 std::optional<int> nw_lag_override) {
    if (errors_a.size() != errors_b.size()) throw ShapeMismatch("error series differ in length");
    size_t n = errors_a.size();
    if (n < 10) throw TooShort("dm_test needs n >= 10");
    if (h < 1) throw InvalidConfig("forecast horizon must be >= 1");

    std::vector<double> d(n);
    for (size_t t = 0; t < n; ++t)
        d[t] = errors_a[t] * errors_a[t] - errors_b[t] * errors_b[t];

    DmResult res;
    res.n = static_cast<int>(n);
    res.nw_lag = nw_lag_override.value_or(h - 1);
    res.dbar = stats::mean(d);

    // Newey-West long-run variance of d_t with Bartlett weights
    auto gamma = [&](int lag) {
        double acc = 0.0;
        for (size_t t = static_cast<size_t>(lag); t < n; ++t)
            acc += (d[t] - res.dbar) * (d[t - lag] - res.dbar);
        return acc / static_cast<double>(n);
    };
    double lrv = gamma(0);
    for (int l = 1; l <= res.nw_lag; ++l)
        lrv += 2.0 * (1.0 - static_cast<double>(l) / (res.nw_lag + 1)) * gamma(l);

    if (!(lrv > 0.0)) throw DegenerateVariance("loss differential has no variance");

    double dm = res.dbar / std::sqrt(lrv / static_cast<double>(n));
    // Harvey-Leybourne-Newbold small-sample scaling
    double nn = static_cast<double>(n);
    double hh = static_cast<double>(h);
    double k = std::sqrt((nn + 1.0 - 2.0 * hh + hh * (hh - 1.0) / nn) / nn);
    res.statistic = k * dm;
    res.hln_applied = true;
    double cdf = stats::student_t_cdf(std::fabs(res.statistic), nn - 1.0);
    res.pvalue = 2.0 * (1.0 - cdf);
    return res;
}

CvPlan stratified_cv(const std::vector<Quarter>& row_quarters, int k, std::uint64_t seed) {
    if (k < 1) throw InvalidConfig("cv needs k >= 1");
    if (row_quarters.size() < static_cast<size_t>(k))
        throw TooFewRows("cv needs at least k rows");

    std::vector<size_t> order(row_quarters.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return row_quarters[a] < row_quarters[b];
    });

    Rng rng(seed);
    size_t rotation = rng.below(static_cast<std::uint64_t>(k));

    CvPlan plan;
    plan.folds.assign(static_cast<size_t>(k), {});
    for (size_t i = 0; i < order.size(); ++i)
        plan.folds[(i + rotation) % static_cast<size_t>(k)].push_back(order[i]);
    return plan;
}

double GridCandidate::capacity() const {
    for (const char* key : {"hidden_size", "d_model"}) {
        auto it = params.find(key);
        if (it != params.end()) return it->second;
    }
    return 0.0;
}

std::string GridCandidate::canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : params) os << k << '=' << v << ';';
    return os.str();
}

GridSearchResult grid_search(
    const std::vector<GridCandidate>& space, const CvPlan& plan,
    const std::function<double(const GridCandidate&, const std::vector<size_t>&,
                               const std::vector<size_t>&)>& fold_rmse) {
    if (space.empty()) throw InvalidConfig("empty search space");

    GridSearchResult res;
    double best_score = std::numeric_limits<double>::infinity();
    int best_idx = -1;

    for (size_t ci = 0; ci < space.size(); ++ci) {
        double sum = 0.0;
        for (size_t f = 0; f < plan.folds.size(); ++f) {
            std::vector<size_t> train;
            for (size_t g = 0; g < plan.folds.size(); ++g)
                if (g != f) train.insert(train.end(), plan.folds[g].begin(), plan.folds[g].end());
            std::sort(train.begin(), train.end());
            std::vector<size_t> valid = plan.folds[f];
            std::sort(valid.begin(), valid.end());

            double rmse = fold_rmse(space[ci], train, valid);
            res.table.push_back({space[ci].canonical(), static_cast<int>(f), rmse});
            sum += rmse;
        }
        double score = sum / static_cast<double>(plan.folds.size());
        bool better = score < best_score;
        if (!better && score == best_score && best_idx >= 0) {
            const auto& cur = space[static_cast<size_t>(best_idx)];
            if (space[ci].capacity() < cur.capacity() ||
                (space[ci].capacity() == cur.capacity() &&
                 space[ci].canonical() < cur.canonical()))
                better = true;
        }
        if (better) {
            best_score = score;
            best_idx = static_cast<int>(ci);
        }
    }
    res.best = space[static_cast<size_t>(best_idx)];
    res.best_score = best_score;
    return res;
}

namespace {

ForecastResult naive_like(const Series& s, const Quarter& test_start, const Quarter& test_end,
                          int lag, const std::string& model) {
    if (test_start > test_end) throw InvalidConfig("empty test span");
    ForecastResult out;
    out.section = s.key;
    out.model = model;
    out.spec = "base_model";
    for (Quarter q = test_start; q <= test_end; q = q.next()) {
        auto idx = s.index_of(q);
        auto src = s.index_of(q.plus(-lag));
        if (!src) throw TooShort("history does not cover lag " + std::to_string(lag));
        ForecastStep step;
        step.quarter = q;
        step.forecast = s.values[*src];
        if (idx && s.observed[*idx]) step.actual = s.values[*idx];
        out.steps.push_back(step);
    }
    return out;
}

}  // namespace

ForecastResult naive_persistence(const Series& s, const Quarter& test_start,
                                 const Quarter& test_end) {
    return naive_like(s, test_start, test_end, 1, "naive");
}

ForecastResult seasonal_naive(const Series& s, const Quarter& test_start,
                              const Quarter& test_end, int season) {
    return naive_like(s, test_start, test_end, season, "seasonal_naive");
}

std::vector<SummaryRow> aggregate_report(const std::vector<SectionMetrics>& per_section) {
    if (per_section.empty()) throw EmptyInput("no section metrics to aggregate");

    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& s : per_section) {
        auto g = std::make_pair(s.model, s.spec);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }

    std::vector<SummaryRow> rows;
    for (const auto& [model, spec] : groups) {
        std::vector<double> rmse, mape, r2;
        for (const auto& s : per_section) {
            if (s.model != model || s.spec != spec) continue;
            rmse.push_back(s.report.rmse);
            mape.push_back(s.report.mape);
            if (s.report.r2_defined) r2.push_back(s.report.r2);
        }
        SummaryRow row;
        row.model = model;
        row.spec = spec;
        row.n_sections = static_cast<int>(rmse.size());
        row.median.rmse = stats::median(rmse);
        row.median.mape = stats::median(mape);
        row.median.r2 = r2.empty() ? 0.0 : stats::median(r2);
        row.median.r2_defined = !r2.empty();
        row.mean.rmse = stats::mean(rmse);
        row.mean.mape = stats::mean(mape);
        row.mean.r2 = r2.empty() ? 0.0 : stats::mean(r2);
        row.mean.r2_defined = !r2.empty();
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fixed(double v, int prec = 2) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string render_summary_table(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "Model        Version      | Median RMSE  MAPE    R2     | Mean   RMSE  MAPE    R2\n";
    os << "-------------------------------------------------------------------------------\n";
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-12s %-12s |        %6s %6s %6s |       %6s %6s %6s\n",
                      r.model.c_str(), r.spec.c_str(), fixed(r.median.rmse).c_str(),
                      fixed(r.median.mape).c_str(),
                      r.median.r2_defined ? fixed(r.median.r2).c_str() : "n/a",
                      fixed(r.mean.rmse).c_str(), fixed(r.mean.mape).c_str(),
                      r.mean.r2_defined ? fixed(r.mean.r2).c_str() : "n/a");
        os << line;
    }
    return os.str();
}

std::string dm_stars(double pvalue) {
    if (pvalue < 0.01) return "***";
    if (pvalue < 0.05) return "**";
    if (pvalue < 0.10) return "*";
    return "";
}

std::string render_dm_table(const std::vector<DmComparison>& rows) {
    std::ostringstream os;
    os << "Comparison                      p-value        dbar     n   stars\n";
    os << "------------------------------------------------------------------\n";
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-30s %9.4g %11.4g %5d   %s\n", r.label.c_str(),
                      r.result.pvalue, r.result.dbar, r.result.n,
                      dm_stars(r.result.pvalue).c_str());
        os << line;
    }
    os << "Two-sided DM on squared errors; Bartlett kernel, HLN correction.\n";
    os << "Stars: * p<0.10, ** p<0.05, *** p<0.01. Negative dbar: first model has lower loss.\n";
    return os.str();
}

}  // namespace mpf
