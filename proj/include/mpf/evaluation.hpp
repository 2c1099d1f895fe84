#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpf/forecast.hpp"
#include "mpf/quarter.hpp"
#include "mpf/series.hpp"

namespace mpf {

struct MetricReport {
    double rmse = 0.0;
    double mape = 0.0;   // percent
    double r2 = 0.0;
    bool r2_defined = true;  // false when the actuals have zero variance
    int n = 0;
    int mape_skipped = 0;    // exact-zero actuals skipped in the MAPE mean
};

// RMSE / MAPE / R^2 over paired actual/predicted values. R^2 uses the mean
// of the actuals in the denominator, so badly wrong forecasts go negative.
MetricReport metrics(std::span<const double> actual, std::span<const double> predicted);

struct DmResult {
    double dbar = 0.0;       // mean loss differential, loss_a - loss_b
    double statistic = 0.0;
    double pvalue = 1.0;     // two-sided, Student-t with n-1 df
    int n = 0;
    int nw_lag = 0;
    bool hln_applied = true;
};

// Diebold-Mariano test on squared forecast errors with Newey-West (Bartlett)
// long-run variance and the Harvey-Leybourne-Newbold small-sample scaling.
// Negative dbar means model a has the lower loss. The Newey-West lag
// defaults to h - 1. Throws DegenerateVariance when d_t is constant.
DmResult dm_test(std::span<const double> errors_a, std::span<const double> errors_b, int h = 1,
                 std::optional<int> nw_lag_override = std::nullopt);

struct CvPlan {
    // folds[k] holds indices into the caller's row list
    std::vector<std::vector<size_t>> folds;
};

// Rows sorted by quarter are dealt round-robin into k folds with a seeded
// rotation, so every fold spans the whole temporal range.
CvPlan stratified_cv(const std::vector<Quarter>& row_quarters, int k, std::uint64_t seed);

struct GridCandidate {
    std::map<std::string, double> params;

    double capacity() const;       // hidden_size / d_model when present, else 0
    std::string canonical() const; // deterministic rendering used for tie-breaks
};

struct GridSearchRow {
    std::string candidate;
    int fold = 0;
    double rmse = 0.0;
};

struct GridSearchResult {
    GridCandidate best;
    double best_score = 0.0;
    std::vector<GridSearchRow> table;  // |space| * k rows
};

// fold_rmse(candidate, train_indices, validation_indices) -> validation RMSE.
// Selection is the minimizer of the fold-mean, ties broken toward smaller
// capacity and then lexicographic canonical order, so the result does not
// depend on evaluation order.
GridSearchResult grid_search(
    const std::vector<GridCandidate>& space, const CvPlan& plan,
    const std::function<double(const GridCandidate&, const std::vector<size_t>&,
                               const std::vector<size_t>&)>& fold_rmse);

// Baselines. Both use realized actuals at every step:
// persistence predicts y_{t-1}, the seasonal variant y_{t-s}.
ForecastResult naive_persistence(const Series& s, const Quarter& test_start,
                                 const Quarter& test_end);
ForecastResult seasonal_naive(const Series& s, const Quarter& test_start,
                              const Quarter& test_end, int season = 4);

struct SectionMetrics {
    SeriesKey section;
    std::string model;
    std::string spec;  // base_model | fine_model
    MetricReport report;
};

struct SummaryRow {
    std::string model;
    std::string spec;
    MetricReport median;
    MetricReport mean;
    int n_sections = 0;
};

// Cross-section aggregation by (model, spec): median and mean of each metric.
std::vector<SummaryRow> aggregate_report(const std::vector<SectionMetrics>& per_section);

// aligned-text table of the summary (model / version rows with median and
// mean metric column groups)
std::string render_summary_table(const std::vector<SummaryRow>& rows);

struct DmComparison {
    std::string label;  // e.g. "lstm vs sarimax"
    DmResult result;
};

std::string render_dm_table(const std::vector<DmComparison>& rows);
std::string dm_stars(double pvalue);  // "***" p<0.01, "**" p<0.05, "*" p<0.10

}  // namespace mpf
