#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mpf/series.hpp"

namespace mpf {

struct PpiCluster {
    std::string name;
    std::vector<SeriesKey> members;
};

// Declarative description of the feature columns to build. `augmented`
// switches between the time-only Base specification and the Augmented one
// that adds PPI-cluster and macro columns with the same transform stack.
struct FeatureSpec {
    bool use_log = false;
    std::vector<int> lag_set = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    bool yoy = true;  // also enables the quarter-over-quarter first difference
    std::vector<int> rolling_windows = {4, 8};  // MA_k and SD_k per window
    bool quarter_dummies = true;
    int lookback_L = 12;
    bool augmented = false;
    std::vector<PpiCluster> ppi_clusters;
    std::vector<SeriesKey> macro_keys;
    std::optional<int> screening;  // top-m per metric when set
    int impute_cap = 2;            // max consecutive LOCF-imputed quarters

    std::uint64_t hash() const;  // stable across runs, used in provenance headers
};

struct FeatureRow {
    Quarter quarter;
    double target = 0.0;
    std::vector<double> x;
};

// Per-quarter feature rows for one target section. Every cell in the row for
// quarter t is a function of panel values at quarters <= t only; rows with
// insufficient history are absent rather than zero-filled.
struct FeatureMatrix {
    SeriesKey target_key;
    std::vector<std::string> column_names;
    std::vector<FeatureRow> rows;
    Quarter first_valid;
    Quarter as_of;
    std::uint64_t spec_hash = 0;

    size_t n_rows() const { return rows.size(); }
    size_t n_cols() const { return column_names.size(); }

    std::optional<size_t> row_index_of(const Quarter& q) const;
    int column_index(const std::string& name) const;  // -1 when absent

    Eigen::MatrixXd x_matrix() const;
    Eigen::VectorXd y_vector() const;

    // matrix restricted to the named columns, order preserved as given
    FeatureMatrix subset(const std::vector<std::string>& columns) const;
    // rows with quarter <= q
    FeatureMatrix rows_through(const Quarter& q) const;

    // CSV with a leading provenance comment line recording as_of + spec hash
    void save_csv(const std::string& path) const;
};

// elementwise natural log; throws NonPositiveValue with the quarter location
Series log_transform(const Series& s);

struct NamedColumn {
    std::string name;
    // aligned to the series axis; NaN where undefined
    std::vector<double> values;
};

std::vector<NamedColumn> lag_features(const Series& s, const std::vector<int>& lags);
NamedColumn yoy_change(const Series& s);   // y_t - y_{t-4}
NamedColumn qoq_change(const Series& s);   // y_t - y_{t-1}
std::vector<NamedColumn> rolling_stats(const Series& s, int k);  // MA_k, SD_k
std::vector<NamedColumn> quarter_dummy_columns(const std::vector<Quarter>& axis);

// equally-weighted mean of member series per quarter; masked (NaN) where a
// member is missing beyond the imputation cap
Series ppi_cluster_aggregate(const Panel& panel, const PpiCluster& cluster,
                             int impute_cap = 2);

struct ScreeningEntry {
    std::string column;
    double abs_pearson = 0.0;
    double abs_spearman = 0.0;
    double ssr = 0.0;
    bool degenerate = false;  // zero variance, dropped
    bool retained = false;
};

struct ScreeningResult {
    std::vector<std::string> retained;  // in original column order
    std::vector<ScreeningEntry> table;
};

// Ranks exogenous columns by |Pearson|, |Spearman| and univariate-OLS SSR
// against the target and keeps the union of the top_m per metric.
// Target-derived columns (no group prefix) are always retained.
ScreeningResult screen_features(const FeatureMatrix& m, int top_m);

// Ranks exogenous columns by |Pearson| of first differences against the
// differenced target and returns the top `top` names (sorted). Level
// correlations are spurious under common trends; differencing is how the
// exploratory analysis measures dependence, so model-input selection uses it
// too.
std::vector<std::string> select_exog_by_diff_correlation(const FeatureMatrix& m, int top);

// Builds the Base or Augmented matrix from panel data up to and including
// as_of. The panel is truncated at as_of before any computation, which is
// what makes the leakage property hold by construction.
FeatureMatrix build_matrix(const Panel& panel, const SeriesKey& target_key,
                           const FeatureSpec& spec, const Quarter& as_of);

void to_json(nlohmann::json& j, const FeatureSpec& spec);
void from_json(const nlohmann::json& j, FeatureSpec& spec);

}  // namespace mpf
