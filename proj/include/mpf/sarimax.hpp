#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mpf/forecast.hpp"
#include "mpf/series.hpp"

namespace mpf::sarimax {

struct SarimaxOrder {
    int p = 1, d = 1, q = 1;
    int P = 1, D = 1, Q = 1;
    int s = 4;

    int diff_span() const { return d + D * s; }
    int n_arma_params() const { return p + q + P + Q; }
    // shortest window that leaves one residual per parameter after differencing
    int min_window() const { return diff_span() + p + q + P * s + Q * s + 2; }
};

struct SarimaxParams {
    SarimaxOrder order;
    std::vector<double> phi;           // non-seasonal AR
    std::vector<double> theta;         // non-seasonal MA (1 + theta_1 L + ...)
    std::vector<double> phi_seasonal;  // seasonal AR
    std::vector<double> theta_seasonal;
    Eigen::VectorXd beta;              // exogenous regression coefficients
    double sigma2 = 0.0;
    double loglik = 0.0;
    bool converged = false;
    bool exog_ridged = false;  // collinear exog stabilized with a ridge start
};

struct RollingConfig {
    int window = 32;
    enum class Fallback { NaivePersistence } fallback = Fallback::NaivePersistence;
};

// (1-L)^d (1-L^s)^D applied non-seasonal first; output length n - d - D*s.
std::vector<double> difference(std::span<const double> values, int d, int D, int s);

// inverse of `difference`: initial holds the first d + D*s original values
std::vector<double> integrate(std::span<const double> diffed, std::span<const double> initial,
                              int d, int D, int s);

// expanded lag polynomial of (1-L)^d (1-L^s)^D, index = lag, coef[0] = 1
std::vector<double> differencing_polynomial(int d, int D, int s);

// Exact Gaussian likelihood of the differenced series with regression on the
// exogenous columns, maximized by multistart Nelder-Mead under
// stationarity/invertibility transforms. exog may have zero columns.
// Throws ConvergenceFailure when no start converges, TooShort on a window
// below the order minimum.
SarimaxParams fit(std::span<const double> window, const Eigen::MatrixXd& exog,
                  const SarimaxOrder& order);

// E[Y_{t+1} | window, exog]; exog_window are the rows used in the fit and
// exog_next the regressor row for the forecast quarter. Throws NotConverged.
double forecast_one_step(const SarimaxParams& params, std::span<const double> window,
                         const Eigen::MatrixXd& exog_window, const Eigen::VectorXd& exog_next);

// exogenous rows aligned to a quarter axis; row i belongs to start + i.
// Rows must be computable one quarter ahead of their own quarter (lagged
// features), which is what keeps the walk-forward leakage-free.
struct AlignedExog {
    Quarter start;
    Eigen::MatrixXd rows;

    std::optional<Eigen::Index> row_of(const Quarter& q) const {
        auto d = quarters_between(start, q);
        if (d < 0 || d >= rows.rows()) return std::nullopt;
        return static_cast<Eigen::Index>(d);
    }
};

struct WalkForwardOptions {
    // fit failures injected for testing the fallback path: every k-th step
    // (1-based) fails when inject_failure_every > 0
    int inject_failure_every = 0;
};

// One-step-ahead rolling forecast over [test_start, test_end]: fit on the
// trailing `cfg.window` observations, forecast, reveal the actual, advance.
// Convergence failures fall back to the last observed value and flag the
// step; they are never surfaced.
ForecastResult rolling_walk_forward(const Series& y, const AlignedExog* exog,
                                    const SarimaxOrder& order, const RollingConfig& cfg,
                                    const Quarter& test_start, const Quarter& test_end,
                                    const WalkForwardOptions& opts = {});

}  // namespace mpf::sarimax
