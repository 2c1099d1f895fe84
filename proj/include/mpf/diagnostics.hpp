#pragma once

#include <array>
#include <string>
#include <vector>

#include "mpf/series.hpp"

namespace mpf::diag {

struct DispersionRow {
    Quarter quarter;
    int n_sections = 0;
    double non_null_pct = 0.0;
    double median = 0.0;
    double iqr = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    double cv = 0.0;  // sd / mean
};

// Cross-sectional dispersion of the panel's CSI sections at the listed
// quarters. IQR uses linear interpolation between order statistics; SD is
// the sample standard deviation.
std::vector<DispersionRow> dispersion_table(const Panel& panel,
                                            const std::vector<Quarter>& quarters);

enum class Detrend { MovingAverage, DummyRegression };

// Quarter-of-year seasonal indices in (index - 1) form: ratios to a centered
// 2x4 moving-average trend (default) or exp of dummy-regression coefficients
// on the log series, averaged per quarter and normalized to mean one.
std::array<double, 4> seasonal_indices(const Series& s,
                                       Detrend method = Detrend::MovingAverage);

// sample autocorrelations at lags 1..max_lag
std::vector<double> acf(const Series& s, int max_lag);

// trailing Pearson correlation over `window` quarters; NaN until the window
// fills or where a window has zero variance
std::vector<double> rolling_correlation(const Series& a, const Series& b, int window = 24);

struct CorrelationMatrix {
    std::vector<SeriesKey> keys;
    std::vector<std::vector<double>> rho;  // symmetric, unit diagonal
};

// pairwise correlations of quarter-over-quarter log changes of the panel's
// CSI sections
CorrelationMatrix correlation_matrix(const Panel& panel);

struct ClusterResult {
    std::vector<int> labels;                      // per key, 0..k-1
    std::vector<std::vector<double>> prototypes;  // per-cluster mean of standardized members
};

// Average-linkage agglomerative clustering with distance 1 - correlation,
// cut at k clusters. Merge ties break on the lexicographically smallest
// member pair, so the result is deterministic.
ClusterResult correlation_cluster(const CorrelationMatrix& m, const Panel& panel, int k);

}  // namespace mpf::diag
