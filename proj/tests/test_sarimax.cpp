#include <doctest.h>

#include <cmath>

#include "mpf/errors.hpp"
#include "mpf/nelder_mead.hpp"
#include "mpf/rng.hpp"
#include "mpf/sarimax.hpp"
#include "mpf/stats.hpp"

using namespace mpf;
using namespace mpf::sarimax;

namespace {

std::vector<double> simulate_ar1(double phi, int n, Rng& rng, double sd = 1.0) {
    std::vector<double> y(static_cast<size_t>(n));
    y[0] = rng.normal() * sd / std::sqrt(1.0 - phi * phi);
    for (int t = 1; t < n; ++t) y[static_cast<size_t>(t)] = phi * y[t - 1] + sd * rng.normal();
    return y;
}

Series level_series(std::vector<double> values, Quarter start = {2000, 1}) {
    Series s;
    s.key = {SeriesKind::CsiSection, "060001"};
    s.start = start;
    s.observed.assign(values.size(), true);
    s.values = std::move(values);
    return s;
}

}  // namespace

TEST_CASE("differencing basics") {
    CHECK(difference(std::vector<double>{1, 2, 4}, 1, 0, 4) == std::vector<double>{1, 2});

    std::vector<double> periodic = {3, 7, 1, 9, 3, 7, 1, 9};
    auto z = difference(periodic, 0, 1, 4);
    REQUIRE(z.size() == 4);
    for (double v : z) CHECK(v == 0.0);

    CHECK_THROWS_AS(difference(std::vector<double>{1, 2}, 1, 1, 4), TooShort);
}

TEST_CASE("integrate undoes difference with stored initial conditions") {
    Rng rng(42);
    std::vector<double> x;
    for (int i = 0; i < 40; ++i) x.push_back(rng.uniform(50, 150));
    for (auto [d, D] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}, std::pair{2, 1}}) {
        auto z = difference(x, d, D, 4);
        std::vector<double> initial(x.begin(), x.begin() + (d + D * 4));
        auto back = integrate(z, initial, d, D, 4);
        REQUIRE(back.size() == x.size());
        for (size_t t = 0; t < x.size(); ++t) CHECK(std::fabs(back[t] - x[t]) < 1e-10);
    }
}

TEST_CASE("ar(1) coefficient recovery at phi = 0.6") {
    // reduced-seed version of the acceptance criterion; the full 100-seed run
    // lives in the acceptance suite
    SarimaxOrder order{.p = 1, .d = 0, .q = 0, .P = 0, .D = 0, .Q = 0, .s = 4};
    double sum_phi = 0.0;
    int failures = 0, n_seeds = 25;
    for (int seed = 0; seed < n_seeds; ++seed) {
        Rng rng(1000 + static_cast<std::uint64_t>(seed));
        auto y = simulate_ar1(0.6, 200, rng);
        try {
            auto params = fit(y, Eigen::MatrixXd(), order);
            sum_phi += params.phi[0];
        } catch (const ConvergenceFailure&) {
            ++failures;
        }
    }
    REQUIRE(failures < 2);
    double mean_phi = sum_phi / (n_seeds - failures);
    CHECK(std::fabs(mean_phi - 0.6) < 0.05);
}

TEST_CASE("white noise fit keeps arma coefficients near zero") {
    SarimaxOrder order{.p = 1, .d = 0, .q = 1, .P = 0, .D = 0, .Q = 0, .s = 4};
    std::vector<double> abs_phi, abs_theta;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(7000 + static_cast<std::uint64_t>(seed));
        std::vector<double> y;
        for (int t = 0; t < 200; ++t) y.push_back(rng.normal());
        try {
            auto params = fit(y, Eigen::MatrixXd(), order);
            abs_phi.push_back(std::fabs(params.phi[0]));
            abs_theta.push_back(std::fabs(params.theta[0]));
        } catch (const ConvergenceFailure&) {
            // tolerated, counted implicitly by the medians below
        }
    }
    REQUIRE(abs_phi.size() > 80);
    CHECK(stats::median(abs_phi) < 0.15);
    CHECK(stats::median(abs_theta) < 0.15);
}

TEST_CASE("constant window cannot converge") {
    std::vector<double> flat(40, 100.0);
    SarimaxOrder order;  // (1,1,1)(1,1,1)_4
    CHECK_THROWS_AS(fit(flat, Eigen::MatrixXd(), order), ConvergenceFailure);
}

TEST_CASE("random-walk order forecasts the last value") {
    Rng rng(3);
    std::vector<double> y;
    double level = 100;
    for (int t = 0; t < 40; ++t) {
        level += rng.normal();
        y.push_back(level);
    }
    SarimaxOrder order{.p = 0, .d = 1, .q = 0, .P = 0, .D = 0, .Q = 0, .s = 4};
    auto params = fit(y, Eigen::MatrixXd(), order);
    double f = forecast_one_step(params, y, Eigen::MatrixXd(), Eigen::VectorXd());
    CHECK(f == doctest::Approx(y.back()).epsilon(1e-12));
}

TEST_CASE("ar(1) closed-form forecast phi * y_n") {
    SarimaxParams params;
    params.order = SarimaxOrder{.p = 1, .d = 0, .q = 0, .P = 0, .D = 0, .Q = 0, .s = 4};
    params.phi = {0.6};
    params.converged = true;
    params.sigma2 = 1.0;
    Rng rng(5);
    auto y = simulate_ar1(0.6, 60, rng);
    double f = forecast_one_step(params, y, Eigen::MatrixXd(), Eigen::VectorXd());
    CHECK(f == doctest::Approx(0.6 * y.back()).epsilon(1e-9));
}

TEST_CASE("one-step forecasts beat persistence on a sarima path") {
    // seasonal AR with persistence-defeating structure
    Rng rng(11);
    int n = 160;
    std::vector<double> y(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        double seasonal = 8.0 * ((t % 4 == 0) ? 1.0 : (t % 4 == 2 ? -1.0 : 0.0));
        double prev = t > 0 ? y[static_cast<size_t>(t - 1)] : 100.0;
        y[static_cast<size_t>(t)] = 0.5 * prev + 50.0 + seasonal + 0.5 * rng.normal();
    }
    SarimaxOrder order{.p = 1, .d = 0, .q = 0, .P = 1, .D = 0, .Q = 0, .s = 4};
    double se_model = 0.0, se_naive = 0.0;
    int steps = 0;
    for (int t = 60; t < n; ++t) {
        std::span<const double> window(y.data() + t - 60, 60);
        auto params = fit(window, Eigen::MatrixXd(), order);
        double f = forecast_one_step(params, window, Eigen::MatrixXd(), Eigen::VectorXd());
        se_model += (y[static_cast<size_t>(t)] - f) * (y[static_cast<size_t>(t)] - f);
        se_naive += (y[static_cast<size_t>(t)] - y[static_cast<size_t>(t - 1)]) *
                    (y[static_cast<size_t>(t)] - y[static_cast<size_t>(t - 1)]);
        ++steps;
    }
    REQUIRE(steps == 100);
    CHECK(std::sqrt(se_model / steps) < std::sqrt(se_naive / steps));
}

TEST_CASE("level shift immunity for d >= 1") {
    Rng rng(13);
    std::vector<double> y;
    double level = 100;
    for (int t = 0; t < 48; ++t) {
        level += 0.5 + rng.normal();
        // grid-aligned values keep the shifted differences bit-identical
        y.push_back(std::round(level * 1024.0) / 1024.0);
    }
    std::vector<double> shifted = y;
    for (auto& v : shifted) v += 256.0;

    SarimaxOrder order{.p = 1, .d = 1, .q = 1, .P = 0, .D = 0, .Q = 0, .s = 4};
    auto pa = fit(y, Eigen::MatrixXd(), order);
    auto pb = fit(shifted, Eigen::MatrixXd(), order);
    double fa = forecast_one_step(pa, y, Eigen::MatrixXd(), Eigen::VectorXd());
    double fb = forecast_one_step(pb, shifted, Eigen::MatrixXd(), Eigen::VectorXd());
    CHECK(fb - fa == doctest::Approx(256.0).epsilon(1e-10));
}

TEST_CASE("pure sarima equals fit with zero exog columns") {
    Rng rng(17);
    auto y = simulate_ar1(0.5, 80, rng);
    SarimaxOrder order{.p = 1, .d = 0, .q = 0, .P = 0, .D = 0, .Q = 0, .s = 4};
    auto a = fit(y, Eigen::MatrixXd(), order);
    auto b = fit(y, Eigen::MatrixXd(80, 0), order);
    CHECK(a.phi[0] == b.phi[0]);
    CHECK(a.loglik == b.loglik);
}

TEST_CASE("optimizer trace is monotone") {
    auto rosenbrock = [](const std::vector<double>& x) {
        double a = 1 - x[0], b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    auto res = nelder_mead(rosenbrock, {-1.2, 1.0}, {.max_iterations = 400});
    for (size_t i = 1; i < res.best_trace.size(); ++i)
        CHECK(res.best_trace[i] <= res.best_trace[i - 1]);
    CHECK(res.fmin < 1e-6);
}

TEST_CASE("walk-forward with an impossible window is pure persistence") {
    Rng rng(19);
    std::vector<double> values;
    for (int t = 0; t < 30; ++t) values.push_back(100 + rng.uniform(-5, 5));
    auto s = level_series(values);

    RollingConfig cfg;
    cfg.window = 6;  // below the (1,1,1)(1,1,1)_4 minimum, every fit fails
    SarimaxOrder order;
    Quarter t0 = s.quarter_at(20), t1 = s.quarter_at(29);
    auto result = rolling_walk_forward(s, nullptr, order, cfg, t0, t1);
    REQUIRE(result.steps.size() == 10);
    for (const auto& step : result.steps) {
        CHECK(step.fallback);
        auto prev = s.index_of(step.quarter.prev());
        CHECK(step.forecast == s.values[*prev]);
    }
    CHECK(result.fallback_count() == 10);
}

TEST_CASE("exact seasonal series is forecast exactly after burn-in") {
    std::vector<double> values;
    const double pattern[4] = {100, 110, 95, 105};
    for (int t = 0; t < 70; ++t) values.push_back(pattern[t % 4] + 0.25 * t);
    auto s = level_series(values);

    RollingConfig cfg;  // default window 32
    SarimaxOrder order;
    Quarter t0 = s.quarter_at(60), t1 = s.quarter_at(69);
    auto result = rolling_walk_forward(s, nullptr, order, cfg, t0, t1);
    REQUIRE(result.steps.size() == 10);
    int clean = 0;
    for (const auto& step : result.steps) {
        if (step.fallback) continue;
        CHECK(std::fabs(step.actual - step.forecast) < 1e-5);
        ++clean;
    }
    CHECK(clean >= 8);  // fallback steps bounded
    CHECK(result.fallback_count() <= static_cast<int>(result.steps.size()));
}

TEST_CASE("injected failures are flagged and substituted with persistence") {
    Rng rng(23);
    std::vector<double> values;
    double level = 100;
    for (int t = 0; t < 80; ++t) {
        level *= std::exp(0.002 + 0.01 * rng.normal());
        values.push_back(level);
    }
    auto s = level_series(values);
    RollingConfig cfg;
    SarimaxOrder order;
    WalkForwardOptions opts;
    opts.inject_failure_every = 3;
    Quarter t0 = s.quarter_at(68), t1 = s.quarter_at(79);
    auto result = rolling_walk_forward(s, nullptr, order, cfg, t0, t1, opts);
    REQUIRE(result.steps.size() == 12);
    int injected = 0;
    for (size_t i = 0; i < result.steps.size(); ++i) {
        if ((i + 1) % 3 == 0) {
            CHECK(result.steps[i].fallback);
            auto prev = s.index_of(result.steps[i].quarter.prev());
            CHECK(result.steps[i].forecast == s.values[*prev]);
            ++injected;
        }
    }
    CHECK(injected == 4);
    CHECK(result.fallback_count() >= injected);
}
