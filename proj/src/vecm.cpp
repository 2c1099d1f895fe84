#include "mpf/vecm.hpp"

#include <cmath>

#include "mpf/errors.hpp"

namespace mpf::vecm {

namespace {

// centered quarterly dummies: 1{q=k} - 1/4 for k = 2, 3, 4
Eigen::RowVectorXd seasonal_row(const Quarter& q) {
    Eigen::RowVectorXd d(3);
    for (int k = 0; k < 3; ++k) d(k) = (q.q == k + 2 ? 1.0 : 0.0) - 0.25;
    return d;
}

}  // namespace

VecmParams johansen_fit(const Eigen::MatrixXd& Y, const std::vector<Quarter>& axis,
                        const VecmConfig& cfg) {
    const int T = static_cast<int>(Y.rows());
    const int m = static_cast<int>(Y.cols());
    if (axis.size() != static_cast<size_t>(T)) throw ShapeMismatch("axis length mismatch");
    if (T < 30) throw TooShort("vecm needs at least 30 observations");
    if (cfg.rank != 1) throw InvalidConfig("only rank 1 is supported");
    if (cfg.diff_lags != 1) throw InvalidConfig("only one lag of differences is supported");

    // effective sample: t = 2 .. T-1 (needs Y_{t-1} and dY_{t-1})
    const int n = T - 2;
    const int nd = cfg.seasonal_indicator ? 3 : 0;
    Eigen::MatrixXd Z0(n, m);       // dY_t
    Eigen::MatrixXd Z1(n, m);       // Y_{t-1}
    Eigen::MatrixXd Z2(n, m + nd);  // [dY_{t-1}, D_t]
    for (int t = 2; t < T; ++t) {
        int r = t - 2;
        Z0.row(r) = Y.row(t) - Y.row(t - 1);
        Z1.row(r) = Y.row(t - 1);
        Z2.block(r, 0, 1, m) = Y.row(t - 1) - Y.row(t - 2);
        if (nd > 0) Z2.block(r, m, 1, nd) = seasonal_row(axis[static_cast<size_t>(t)]);
    }

    // concentrate out the short-run terms
    Eigen::MatrixXd M22 = Z2.transpose() * Z2;
    Eigen::LDLT<Eigen::MatrixXd> ldlt22(M22);
    if (ldlt22.info() != Eigen::Success ||
        ldlt22.vectorD().minCoeff() < 1e-12 * std::max(1.0, M22.trace()))
        throw NearSingular("short-run regressor matrix is singular");
    Eigen::MatrixXd B0 = ldlt22.solve(Z2.transpose() * Z0);
    Eigen::MatrixXd B1 = ldlt22.solve(Z2.transpose() * Z1);
    Eigen::MatrixXd R0 = Z0 - Z2 * B0;
    Eigen::MatrixXd R1 = Z1 - Z2 * B1;

    Eigen::MatrixXd S00 = R0.transpose() * R0 / n;
    Eigen::MatrixXd S01 = R0.transpose() * R1 / n;
    Eigen::MatrixXd S11 = R1.transpose() * R1 / n;

    Eigen::LDLT<Eigen::MatrixXd> ldlt00(S00);
    if (ldlt00.info() != Eigen::Success ||
        ldlt00.vectorD().minCoeff() < 1e-12 * std::max(1.0, S00.trace()))
        throw NearSingular("innovation covariance is singular (collinear system)");

    Eigen::LLT<Eigen::MatrixXd> llt11(S11);
    if (llt11.info() != Eigen::Success)
        throw NearSingular("level covariance is not positive definite");
    Eigen::MatrixXd L = llt11.matrixL();

    // symmetric problem: L^-1 S10 S00^-1 S01 L^-T
    Eigen::MatrixXd S10 = S01.transpose();
    Eigen::MatrixXd inner = S10 * ldlt00.solve(S01);
    Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(inner);
    Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
    M = 0.5 * (M + M.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    if (eig.info() != Eigen::Success) throw NearSingular("eigendecomposition failed");

    VecmParams params;
    params.seasonal = cfg.seasonal_indicator;
    for (int i = m - 1; i >= 0; --i) params.eigenvalues.push_back(eig.eigenvalues()(i));

    // largest canonical correlation carries the cointegrating direction
    Eigen::VectorXd u = eig.eigenvectors().col(m - 1);
    Eigen::VectorXd beta =
        L.transpose().triangularView<Eigen::Upper>().solve(u);
    if (std::fabs(beta(0)) < 1e-10)
        throw NearSingular("cointegration vector has no loading on the target");
    beta /= beta(0);

    double denom = beta.dot(S11 * beta);
    if (!(denom > 0.0)) throw NearSingular("degenerate cointegration direction");
    Eigen::VectorXd alpha = S01 * beta / denom;

    params.beta_coint = beta;
    params.alpha = alpha;
    params.Pi = alpha * beta.transpose();

    // short-run and seasonal coefficients given Pi
    Eigen::MatrixXd target = Z0 - Z1 * params.Pi.transpose();
    Eigen::MatrixXd Psi = ldlt22.solve(Z2.transpose() * target);  // (m+nd) x m
    params.Gamma1 = Psi.topRows(m).transpose();
    params.exog_coefs = nd > 0 ? Eigen::MatrixXd(Psi.bottomRows(nd).transpose())
                               : Eigen::MatrixXd::Zero(m, 0);

    Eigen::MatrixXd resid = target - Z2 * Psi;
    params.resid_cov = resid.transpose() * resid / n;
    return params;
}

VecmParams johansen_fit(const Series& target, const Eigen::MatrixXd& components,
                        const VecmConfig& cfg) {
    const int T = static_cast<int>(target.size());
    if (components.rows() != T) throw ShapeMismatch("component rows must match the target");
    Eigen::MatrixXd Y(T, 1 + components.cols());
    std::vector<Quarter> axis;
    for (int t = 0; t < T; ++t) {
        Y(t, 0) = target.values[static_cast<size_t>(t)];
        for (Eigen::Index j = 0; j < components.cols(); ++j) Y(t, 1 + j) = components(t, j);
        axis.push_back(target.quarter_at(static_cast<size_t>(t)));
    }
    return johansen_fit(Y, axis, cfg);
}

VecmState last_state(const Eigen::MatrixXd& Y, const std::vector<Quarter>& axis) {
    if (Y.rows() < 2) throw TooShort("need two rows for the last state");
    VecmState st;
    st.y_last = Y.row(Y.rows() - 1);
    st.dy_last = Y.row(Y.rows() - 1) - Y.row(Y.rows() - 2);
    st.last_quarter = axis.back();
    return st;
}

Eigen::MatrixXd vecm_forecast(const VecmParams& params, const VecmState& state, int horizon) {
    if (horizon < 1) throw InvalidConfig("horizon must be >= 1");
    const int m = static_cast<int>(params.Pi.rows());
    Eigen::MatrixXd path(horizon, m);
    Eigen::VectorXd y = state.y_last;
    Eigen::VectorXd dy = state.dy_last;
    Quarter q = state.last_quarter;
    for (int h = 0; h < horizon; ++h) {
        q = q.next();
        Eigen::VectorXd dnext = params.Pi * y + params.Gamma1 * dy;
        if (params.seasonal && params.exog_coefs.cols() == 3)
            dnext += params.exog_coefs * seasonal_row(q).transpose();
        y = y + dnext;
        dy = dnext;
        path.row(h) = y.transpose();
    }
    return path;
}

}  // namespace mpf::vecm
