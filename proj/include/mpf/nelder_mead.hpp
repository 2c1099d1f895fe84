#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace mpf {

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    // best objective value after each iteration; non-increasing by construction
    std::vector<double> best_trace;
};

struct NelderMeadOptions {
    int max_iterations = 500;
    double ftol_rel = 1e-8;       // relative spread of the simplex values
    double initial_step = 0.25;   // per-coordinate displacement of the start simplex
};

// Downhill simplex minimization (Nelder & Mead 1965) with the standard
// reflection/expansion/contraction/shrink coefficients.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0,
                                    const NelderMeadOptions& opt = {}) {
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    const size_t n = x0.size();

    std::vector<std::vector<double>> x(n + 1, x0);
    for (size_t i = 0; i < n; ++i) {
        double step = opt.initial_step * std::max(1.0, std::fabs(x0[i]));
        x[i + 1][i] += step;
    }
    std::vector<double> fx(n + 1);
    for (size_t i = 0; i <= n; ++i) fx[i] = f(x[i]);

    NelderMeadResult res;
    auto sort_simplex = [&]() {
        std::vector<size_t> idx(n + 1);
        for (size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fx[a] < fx[b]; });
        std::vector<std::vector<double>> x2(n + 1);
        std::vector<double> f2(n + 1);
        for (size_t i = 0; i <= n; ++i) {
            x2[i] = x[idx[i]];
            f2[i] = fx[idx[i]];
        }
        x.swap(x2);
        fx.swap(f2);
    };

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        sort_simplex();
        res.best_trace.push_back(fx[0]);
        double spread = std::fabs(fx[n] - fx[0]);
        double scale = std::max(1.0, std::fabs(fx[0]));
        if (spread <= opt.ftol_rel * scale) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) centroid[j] += x[i][j] / static_cast<double>(n);

        auto blend = [&](const std::vector<double>& from, double coef) {
            std::vector<double> p(n);
            for (size_t j = 0; j < n; ++j) p[j] = centroid[j] + coef * (from[j] - centroid[j]);
            return p;
        };

        auto xr = blend(x[n], -alpha);
        double fr = f(xr);
        if (fr < fx[0]) {
            auto xe = blend(x[n], -alpha * gamma);
            double fe = f(xe);
            if (fe < fr) {
                x[n] = xe;
                fx[n] = fe;
            } else {
                x[n] = xr;
                fx[n] = fr;
            }
        } else if (fr < fx[n - 1]) {
            x[n] = xr;
            fx[n] = fr;
        } else {
            bool outside = fr < fx[n];
            auto xc = outside ? blend(x[n], -alpha * rho) : blend(x[n], rho);
            double fc = f(xc);
            if (fc < std::min(fr, fx[n])) {
                x[n] = xc;
                fx[n] = fc;
            } else {
                for (size_t i = 1; i <= n; ++i) {
                    for (size_t j = 0; j < n; ++j)
                        x[i][j] = x[0][j] + sigma * (x[i][j] - x[0][j]);
                    fx[i] = f(x[i]);
                }
            }
        }
    }
    sort_simplex();
    res.x = x[0];
    res.fmin = fx[0];
    if (!res.best_trace.empty() && fx[0] < res.best_trace.back())
        res.best_trace.push_back(fx[0]);
    return res;
}

}  // namespace mpf
