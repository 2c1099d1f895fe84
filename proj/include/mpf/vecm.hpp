#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mpf/quarter.hpp"
#include "mpf/series.hpp"

namespace mpf::vecm {

struct VecmConfig {
    int diff_lags = 1;  // lags of differenced terms
    int rank = 1;
    int horizon = 10;
    int n_components = 10;
    bool seasonal_indicator = true;
};

struct VecmParams {
    Eigen::VectorXd alpha;       // adjustment coefficients
    Eigen::VectorXd beta_coint;  // cointegration vector, first element 1
    Eigen::MatrixXd Pi;          // alpha * beta'
    Eigen::MatrixXd Gamma1;      // short-run matrix on the lagged differences
    Eigen::MatrixXd exog_coefs;  // per-equation coefficients of the seasonal dummies
    Eigen::MatrixXd resid_cov;
    std::vector<double> eigenvalues;  // canonical correlations, descending
    bool seasonal = false;
};

// Johansen reduced-rank regression of dY_t on Y_{t-1} and dY_{t-1} with
// rank-1 Pi, no deterministic trend, optional centered quarterly dummies.
// Y columns: the target first, then the endogenous components. axis[t] is
// the quarter of row t (used for the dummies). Throws NearSingular when the
// moment matrices are not invertible (e.g. duplicated series), TooShort
// below 30 observations.
VecmParams johansen_fit(const Eigen::MatrixXd& Y, const std::vector<Quarter>& axis,
                        const VecmConfig& cfg);

// convenience wrapper assembling the system from a target series and a
// component score matrix aligned to the same axis
VecmParams johansen_fit(const Series& target, const Eigen::MatrixXd& components,
                        const VecmConfig& cfg);

struct VecmState {
    Eigen::VectorXd y_last;       // Y_{T-1}
    Eigen::VectorXd dy_last;      // Y_{T-1} - Y_{T-2}
    Quarter last_quarter;         // quarter of Y_{T-1}
};

VecmState last_state(const Eigen::MatrixXd& Y, const std::vector<Quarter>& axis);

// iterates the error-correction recursion in differences and accumulates to
// levels; returns the full system path (horizon rows)
Eigen::MatrixXd vecm_forecast(const VecmParams& params, const VecmState& state, int horizon);

}  // namespace mpf::vecm
