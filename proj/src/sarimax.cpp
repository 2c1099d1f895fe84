#include "mpf/sarimax.hpp"

#include <algorithm>
#include <cmath>

#include "mpf/errors.hpp"
#include "mpf/nelder_mead.hpp"

namespace mpf::sarimax {

namespace {

// ---------------------------------------------------------------------------
// polynomial helpers (lag polynomials stored as coefficient vectors, index =
// lag, coef[0] = 1)
// ---------------------------------------------------------------------------

std::vector<double> poly_multiply(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// 1 - c_1 L - ... - c_k L^k from coefficient list c (AR sign convention)
std::vector<double> ar_polynomial(const std::vector<double>& coefs, int season = 1) {
    std::vector<double> poly(coefs.size() * static_cast<size_t>(season) + 1, 0.0);
    poly[0] = 1.0;
    for (size_t i = 0; i < coefs.size(); ++i) poly[(i + 1) * static_cast<size_t>(season)] = -coefs[i];
    return poly;
}

// 1 + c_1 L + ... + c_k L^k (MA sign convention, as printed)
std::vector<double> ma_polynomial(const std::vector<double>& coefs, int season = 1) {
    std::vector<double> poly(coefs.size() * static_cast<size_t>(season) + 1, 0.0);
    poly[0] = 1.0;
    for (size_t i = 0; i < coefs.size(); ++i) poly[(i + 1) * static_cast<size_t>(season)] = coefs[i];
    return poly;
}

// Monahan (1984) map from unconstrained reals to a stationary AR coefficient
// vector: tanh to partial autocorrelations, then the Durbin-Levinson
// recursion. Guarantees all roots of 1 - sum c_i L^i outside the unit circle.
std::vector<double> stationary_from_unconstrained(std::span<const double> u) {
    size_t k = u.size();
    std::vector<double> pacf(k);
    for (size_t i = 0; i < k; ++i) pacf[i] = std::tanh(u[i]);
    std::vector<double> c(pacf.begin(), pacf.end());
    for (size_t j = 1; j < k; ++j) {
        std::vector<double> prev(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(j));
        for (size_t i = 0; i < j; ++i) c[i] = prev[i] - pacf[j] * prev[j - 1 - i];
        c[j] = pacf[j];
    }
    return c;
}

// ---------------------------------------------------------------------------
// exact ARMA likelihood via the Kalman filter in Harvey's state-space form
// ---------------------------------------------------------------------------

struct ArmaStateSpace {
    Eigen::MatrixXd T;
    Eigen::VectorXd R;
    int r = 1;

    // ar: coefficients of the recursion w_t = sum ar_i w_{t-i} + eps + ...;
    // ma: psi_i in w_t = ... + eps_t + psi_1 eps_{t-1} + ...
    static ArmaStateSpace build(const std::vector<double>& ar, const std::vector<double>& ma) {
        ArmaStateSpace ss;
        ss.r = std::max(static_cast<int>(ar.size()), static_cast<int>(ma.size()) + 1);
        ss.T = Eigen::MatrixXd::Zero(ss.r, ss.r);
        ss.R = Eigen::VectorXd::Zero(ss.r);
        for (int i = 0; i < ss.r; ++i) {
            if (i < static_cast<int>(ar.size())) ss.T(i, 0) = ar[static_cast<size_t>(i)];
            if (i + 1 < ss.r) ss.T(i, i + 1) = 1.0;
        }
        ss.R(0) = 1.0;
        for (int i = 1; i < ss.r; ++i)
            if (i - 1 < static_cast<int>(ma.size())) ss.R(i) = ma[static_cast<size_t>(i - 1)];
        return ss;
    }

    // stationary covariance: solve P = T P T' + R R'
    Eigen::MatrixXd stationary_cov() const {
        int n = r * r;
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                for (int k = 0; k < r; ++k)
                    for (int l = 0; l < r; ++l) A(i * r + j, k * r + l) -= T(i, k) * T(j, l);
        Eigen::VectorXd b(n);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) b(i * r + j) = R(i) * R(j);
        Eigen::VectorXd v = A.partialPivLu().solve(b);
        Eigen::MatrixXd P(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) P(i, j) = v(i * r + j);
        return P;
    }
};

struct LikelihoodEval {
    double loglik = -std::numeric_limits<double>::infinity();
    double sigma2 = 0.0;
    bool ok = false;
};

// concentrated Gaussian log-likelihood of z under the ARMA model
LikelihoodEval arma_loglik(std::span<const double> z, const std::vector<double>& ar,
                           const std::vector<double>& ma) {
    LikelihoodEval out;
    const int n = static_cast<int>(z.size());
    if (n < 2) return out;

    auto ss = ArmaStateSpace::build(ar, ma);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ss.r);
    Eigen::MatrixXd P = ss.stationary_cov();
    if (!P.allFinite()) return out;

    double sum_log_f = 0.0;
    double sum_v2f = 0.0;
    for (int t = 0; t < n; ++t) {
        double v = z[static_cast<size_t>(t)] - a(0);
        double F = P(0, 0);
        if (!(F > 1e-300) || !std::isfinite(F)) return out;
        sum_log_f += std::log(F);
        sum_v2f += v * v / F;

        Eigen::VectorXd PZ = P.col(0);           // P Z'
        Eigen::VectorXd K = ss.T * PZ / F;       // Kalman gain
        a = ss.T * a + K * v;
        P = ss.T * P * ss.T.transpose() + ss.R * ss.R.transpose() - K * K.transpose() * F;
        P = 0.5 * (P + P.transpose());           // keep symmetric
    }
    double sigma2 = sum_v2f / n;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return out;
    out.sigma2 = sigma2;
    out.loglik = -0.5 * n * (std::log(2.0 * M_PI) + 1.0 + std::log(sigma2)) - 0.5 * sum_log_f;
    out.ok = std::isfinite(out.loglik);
    return out;
}

// one-step state prediction after filtering the whole series: returns
// E[z_{n+1} | z_1..z_n]
double arma_predict_next(std::span<const double> z, const std::vector<double>& ar,
                         const std::vector<double>& ma) {
    auto ss = ArmaStateSpace::build(ar, ma);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ss.r);
    Eigen::MatrixXd P = ss.stationary_cov();
    for (size_t t = 0; t < z.size(); ++t) {
        double v = z[t] - a(0);
        double F = P(0, 0);
        if (!(F > 1e-300)) throw NotConverged("degenerate filter variance");
        Eigen::VectorXd K = ss.T * P.col(0) / F;
        a = ss.T * a + K * v;
        P = ss.T * P * ss.T.transpose() + ss.R * ss.R.transpose() - K * K.transpose() * F;
        P = 0.5 * (P + P.transpose());
    }
    return a(0);
}

// unpack the optimizer vector into ARMA polynomials and beta
struct Unpacked {
    std::vector<double> ar_full;  // recursion coefficients, lag-indexed
    std::vector<double> ma_full;
    std::vector<double> phi, theta, Phi, Theta;
    Eigen::VectorXd beta;
};

Unpacked unpack(const std::vector<double>& u, const SarimaxOrder& o, int n_exog) {
    Unpacked out;
    size_t at = 0;
    auto take = [&](int n) {
        std::span<const double> s(u.data() + at, static_cast<size_t>(n));
        at += static_cast<size_t>(n);
        return stationary_from_unconstrained(s);
    };
    out.phi = take(o.p);
    auto theta_c = take(o.q);
    out.Phi = take(o.P);
    auto Theta_c = take(o.Q);
    // the stationarity map returns AR-sign coefficients; MA uses the mirrored
    // sign so 1 + theta(L) stays invertible
    out.theta.resize(theta_c.size());
    for (size_t i = 0; i < theta_c.size(); ++i) out.theta[i] = -theta_c[i];
    out.Theta.resize(Theta_c.size());
    for (size_t i = 0; i < Theta_c.size(); ++i) out.Theta[i] = -Theta_c[i];

    auto ar_poly = poly_multiply(ar_polynomial(out.phi), ar_polynomial(out.Phi, o.s));
    auto ma_poly = poly_multiply(ma_polynomial(out.theta), ma_polynomial(out.Theta, o.s));
    out.ar_full.assign(ar_poly.size() - 1, 0.0);
    for (size_t i = 1; i < ar_poly.size(); ++i) out.ar_full[i - 1] = -ar_poly[i];
    out.ma_full.assign(ma_poly.begin() + 1, ma_poly.end());

    out.beta = Eigen::VectorXd::Zero(n_exog);
    for (int i = 0; i < n_exog; ++i) out.beta(i) = u[at + static_cast<size_t>(i)];
    return out;
}

}  // namespace

std::vector<double> difference(std::span<const double> values, int d, int D, int s) {
    if (d < 0 || D < 0 || s < 1) throw InvalidConfig("invalid differencing order");
    if (static_cast<int>(values.size()) <= d + D * s)
        throw TooShort("series shorter than the differencing span");
    std::vector<double> z(values.begin(), values.end());
    for (int k = 0; k < d; ++k) {
        for (size_t t = z.size() - 1; t >= 1; --t) z[t] -= z[t - 1];
        z.erase(z.begin());
    }
    for (int k = 0; k < D; ++k) {
        for (size_t t = z.size() - 1; t >= static_cast<size_t>(s); --t) z[t] -= z[t - s];
        z.erase(z.begin(), z.begin() + s);
    }
    return z;
}

std::vector<double> differencing_polynomial(int d, int D, int s) {
    std::vector<double> poly = {1.0};
    std::vector<double> d1 = {1.0, -1.0};
    std::vector<double> ds(static_cast<size_t>(s) + 1, 0.0);
    ds[0] = 1.0;
    ds[static_cast<size_t>(s)] = -1.0;
    for (int k = 0; k < d; ++k) poly = poly_multiply(poly, d1);
    for (int k = 0; k < D; ++k) poly = poly_multiply(poly, ds);
    return poly;
}

std::vector<double> integrate(std::span<const double> diffed, std::span<const double> initial,
                              int d, int D, int s) {
    auto c = differencing_polynomial(d, D, s);
    size_t span = c.size() - 1;  // d + D*s
    if (initial.size() != span) throw ShapeMismatch("integrate needs d + D*s initial values");
    std::vector<double> x(initial.begin(), initial.end());
    x.reserve(span + diffed.size());
    for (size_t i = 0; i < diffed.size(); ++i) {
        double v = diffed[i];
        size_t t = span + i;
        for (size_t j = 1; j <= span; ++j) v -= c[j] * x[t - j];
        x.push_back(v);
    }
    return x;
}

SarimaxParams fit(std::span<const double> window, const Eigen::MatrixXd& exog,
                  const SarimaxOrder& order) {
    const int n = static_cast<int>(window.size());
    const int n_exog = static_cast<int>(exog.cols());
    if (exog.size() > 0 && exog.rows() != n)
        throw ShapeMismatch("exog rows must match the window");
    if (n < order.min_window()) throw TooShort("window below the order minimum");

    // difference endog and exog alike (regression in differences keeps beta
    // in level units)
    std::vector<double> zy = difference(window, order.d, order.D, order.s);
    const int nz = static_cast<int>(zy.size());
    Eigen::MatrixXd zx(nz, n_exog);
    for (int j = 0; j < n_exog; ++j) {
        std::vector<double> col(static_cast<size_t>(n));
        for (int t = 0; t < n; ++t) col[static_cast<size_t>(t)] = exog(t, j);
        auto dz = difference(col, order.d, order.D, order.s);
        for (int t = 0; t < nz; ++t) zx(t, j) = dz[static_cast<size_t>(t)];
    }

    // constant raw windows cannot identify anything
    double wmean = 0.0, wvar = 0.0;
    for (double v : window) wmean += v;
    wmean /= n;
    for (double v : window) wvar += (v - wmean) * (v - wmean);
    if (!(wvar > 1e-12)) throw ConvergenceFailure("window is (numerically) constant");

    // a deterministic pattern that differencing removes exactly is a perfect
    // fit, not a failure: zero ARMA coefficients reproduce it
    double zmean = 0.0, zvar = 0.0;
    for (double v : zy) zmean += v;
    zmean /= nz;
    for (double v : zy) zvar += (v - zmean) * (v - zmean);
    if (zvar / nz < 1e-10) {
        SarimaxParams params;
        params.order = order;
        params.phi.assign(static_cast<size_t>(order.p), 0.0);
        params.theta.assign(static_cast<size_t>(order.q), 0.0);
        params.phi_seasonal.assign(static_cast<size_t>(order.P), 0.0);
        params.theta_seasonal.assign(static_cast<size_t>(order.Q), 0.0);
        params.beta = Eigen::VectorXd::Zero(n_exog);
        params.sigma2 = std::max(zvar / nz, 1e-12);  // keep the positivity contract
        params.loglik = 0.0;
        params.converged = true;
        return params;
    }

    // OLS starting value for beta, ridge-stabilized when collinear
    bool ridged = false;
    Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(n_exog);
    if (n_exog > 0) {
        Eigen::MatrixXd xtx = zx.transpose() * zx;
        Eigen::VectorXd xty = zx.transpose() * Eigen::Map<const Eigen::VectorXd>(zy.data(), nz);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
        double cond_floor = 1e-10 * xtx.trace() / std::max(1, n_exog);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < cond_floor) {
            ridged = true;
            double lambda = std::max(1e-8, 1e-6 * xtx.trace() / std::max(1, n_exog));
            xtx += lambda * Eigen::MatrixXd::Identity(n_exog, n_exog);
        }
        beta0 = xtx.ldlt().solve(xty);
    }

    const int n_params = order.n_arma_params() + n_exog;
    if (n_params == 0) {
        // nothing to optimize: pure integrated noise
        auto ev = arma_loglik(zy, {}, {});
        if (!ev.ok) throw ConvergenceFailure("likelihood evaluation failed");
        SarimaxParams params;
        params.order = order;
        params.sigma2 = ev.sigma2;
        params.loglik = ev.loglik;
        params.converged = true;
        return params;
    }
    // shrinkage on the transformed ARMA parameters resolves the common-factor
    // ridge (ARMA(1,1) on white noise, where phi = -theta leaves the
    // likelihood flat up to a spurious ~1 loglik bump); the penalty is O(1)
    // against a likelihood that scales with n, so identified fits barely move
    const double arma_ridge = 1.0;
    auto objective = [&](const std::vector<double>& u) {
        auto up = unpack(u, order, n_exog);
        std::vector<double> resid(zy.size());
        for (int t = 0; t < nz; ++t) {
            double r = zy[static_cast<size_t>(t)];
            for (int j = 0; j < n_exog; ++j) r -= up.beta(j) * zx(t, j);
            resid[static_cast<size_t>(t)] = r;
        }
        auto ev = arma_loglik(resid, up.ar_full, up.ma_full);
        if (!ev.ok) return 1e12;
        double penalty = 0.0;
        for (int i = 0; i < order.n_arma_params(); ++i)
            penalty += u[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
        return -ev.loglik + arma_ridge * penalty;
    };

    // three deterministic starts
    std::vector<std::vector<double>> starts;
    {
        std::vector<double> base(static_cast<size_t>(n_params), 0.0);
        for (int j = 0; j < n_exog; ++j)
            base[static_cast<size_t>(order.n_arma_params() + j)] = beta0(j);
        starts.push_back(base);
        std::vector<double> pos = base;
        for (int i = 0; i < order.n_arma_params(); ++i) pos[static_cast<size_t>(i)] = 0.4;
        starts.push_back(pos);
        std::vector<double> neg = base;
        for (int i = 0; i < order.n_arma_params(); ++i) neg[static_cast<size_t>(i)] = -0.4;
        starts.push_back(neg);
    }

    NelderMeadOptions nm;
    nm.max_iterations = 500;
    nm.ftol_rel = 1e-8;

    NelderMeadResult best;
    bool any_converged = false;
    for (auto& s : starts) {
        auto r = nelder_mead(objective, s, nm);
        if (!r.converged) continue;
        if (!any_converged || r.fmin < best.fmin) best = r;
        any_converged = true;
    }
    if (!any_converged) throw ConvergenceFailure("no optimizer start converged");

    auto up = unpack(best.x, order, n_exog);
    std::vector<double> resid(zy.size());
    for (int t = 0; t < nz; ++t) {
        double r = zy[static_cast<size_t>(t)];
        for (int j = 0; j < n_exog; ++j) r -= up.beta(j) * zx(t, j);
        resid[static_cast<size_t>(t)] = r;
    }
    auto ev = arma_loglik(resid, up.ar_full, up.ma_full);
    if (!ev.ok) throw ConvergenceFailure("final likelihood evaluation failed");

    SarimaxParams params;
    params.order = order;
    params.phi = up.phi;
    params.theta = up.theta;
    params.phi_seasonal = up.Phi;
    params.theta_seasonal = up.Theta;
    params.beta = up.beta;
    params.sigma2 = ev.sigma2;
    params.loglik = ev.loglik;
    params.converged = true;
    params.exog_ridged = ridged;
    return params;
}

double forecast_one_step(const SarimaxParams& params, std::span<const double> window,
                         const Eigen::MatrixXd& exog_window, const Eigen::VectorXd& exog_next) {
    if (!params.converged) throw NotConverged("forecast from unconverged parameters");
    const auto& o = params.order;
    const int n = static_cast<int>(window.size());
    const int n_exog = static_cast<int>(params.beta.size());
    if (n_exog > 0 && (exog_window.rows() != n || exog_window.cols() != n_exog ||
                       exog_next.size() != n_exog))
        throw ShapeMismatch("exog shapes do not match the fitted parameters");

    // regression part out, in levels
    std::vector<double> eta(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        double v = window[static_cast<size_t>(t)];
        for (int j = 0; j < n_exog; ++j) v -= params.beta(j) * exog_window(t, j);
        eta[static_cast<size_t>(t)] = v;
    }

    auto z = difference(eta, o.d, o.D, o.s);

    auto ar_poly = poly_multiply(ar_polynomial(params.phi), ar_polynomial(params.phi_seasonal, o.s));
    auto ma_poly =
        poly_multiply(ma_polynomial(params.theta), ma_polynomial(params.theta_seasonal, o.s));
    std::vector<double> ar_full(ar_poly.size() - 1);
    for (size_t i = 1; i < ar_poly.size(); ++i) ar_full[i - 1] = -ar_poly[i];
    std::vector<double> ma_full(ma_poly.begin() + 1, ma_poly.end());

    double z_next = z.empty() ? 0.0 : arma_predict_next(z, ar_full, ma_full);

    // undo the differencing: eta_{n+1} = z_next - sum_j c_j eta_{n+1-j}
    auto c = differencing_polynomial(o.d, o.D, o.s);
    double eta_next = z_next;
    for (size_t j = 1; j < c.size(); ++j) {
        int idx = n - static_cast<int>(j);
        if (idx < 0) throw TooShort("window shorter than the differencing span");
        eta_next -= c[j] * eta[static_cast<size_t>(idx)];
    }

    double y_next = eta_next;
    for (int j = 0; j < n_exog; ++j) y_next += params.beta(j) * exog_next(j);
    return y_next;
}

ForecastResult rolling_walk_forward(const Series& y, const AlignedExog* exog,
                                    const SarimaxOrder& order, const RollingConfig& cfg,
                                    const Quarter& test_start, const Quarter& test_end,
                                    const WalkForwardOptions& opts) {
    if (test_start > test_end) throw InvalidConfig("empty test span");
    ForecastResult out;
    out.section = y.key;
    out.model = "sarimax";
    out.spec = (exog && exog->rows.cols() > 0) ? "fine_model" : "base_model";

    const int n_exog = exog ? static_cast<int>(exog->rows.cols()) : 0;
    int step_no = 0;

    for (Quarter q = test_start; q <= test_end; q = q.next()) {
        ++step_no;
        auto qi = y.index_of(q);
        auto prev = y.index_of(q.prev());
        if (!prev) throw TooShort("no history before " + q.str());

        // trailing window of realized values strictly before q
        int end = static_cast<int>(*prev) + 1;  // exclusive
        int begin = std::max(0, end - cfg.window);
        std::span<const double> window(y.values.data() + begin, static_cast<size_t>(end - begin));

        Eigen::MatrixXd exog_window(end - begin, n_exog);
        Eigen::VectorXd exog_next(n_exog);
        bool exog_ok = n_exog > 0;
        if (exog_ok) {
            for (int t = begin; t < end; ++t) {
                auto r = exog->row_of(y.quarter_at(static_cast<size_t>(t)));
                if (!r) {
                    exog_ok = false;
                    break;
                }
                exog_window.row(t - begin) = exog->rows.row(*r);
            }
            auto rn = exog->row_of(q);
            if (!rn) exog_ok = false;
            else exog_next = exog->rows.row(*rn);
        }

        ForecastStep step;
        step.quarter = q;
        if (qi && y.observed[*qi]) step.actual = y.values[*qi];

        bool inject = opts.inject_failure_every > 0 && step_no % opts.inject_failure_every == 0;
        try {
            if (inject) throw ConvergenceFailure("injected failure");
            if (n_exog > 0 && !exog_ok) throw ConvergenceFailure("exog rows unavailable");
            auto params = fit(window, n_exog > 0 ? exog_window : Eigen::MatrixXd(), order);
            step.forecast = forecast_one_step(params, window,
                                              n_exog > 0 ? exog_window : Eigen::MatrixXd(),
                                              exog_next);
            if (!std::isfinite(step.forecast)) throw ConvergenceFailure("non-finite forecast");
        } catch (const Error&) {
            step.forecast = y.values[*prev];  // naive persistence
            step.fallback = true;
        }
        out.steps.push_back(step);
    }
    return out;
}

}  // namespace mpf::sarimax
