#include <doctest.h>

#include <cmath>

#include "mpf/errors.hpp"
#include "mpf/stats.hpp"
#include "mpf/synthetic.hpp"

using namespace mpf;

TEST_CASE("degenerate dgp is constant at 100") {
    DgpConfig cfg;
    cfg.n_sections = 3;
    cfg.n_ppi = 2;
    cfg.n_macro = 1;
    cfg.T = 24;
    cfg.seed = 42;
    cfg.noise_sd = 0.0;
    cfg.trend_drift = 0.0;
    cfg.seasonal_amplitude = 0.0;
    auto gen = generate_panel(cfg);
    for (const auto& s : gen.panel.series())
        for (double v : s.values) CHECK(v == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("identical config and seed give identical panels") {
    DgpConfig cfg;
    cfg.T = 40;
    cfg.seed = 1234;
    cfg.noise_sd = 0.05;
    cfg.seasonal_amplitude = 0.03;
    cfg.trend_drift = 0.01;
    auto a = generate_panel(cfg);
    auto b = generate_panel(cfg);
    REQUIRE(a.panel.count() == b.panel.count());
    for (size_t si = 0; si < a.panel.count(); ++si) {
        const auto& sa = a.panel.series()[si];
        const auto& sb = b.panel.series()[si];
        for (size_t t = 0; t < sa.size(); ++t) CHECK(sa.values[t] == sb.values[t]);
    }
}

TEST_CASE("one driver, weight 1, lead 1: section tracks the driver shifted by one") {
    DgpConfig cfg;
    cfg.n_sections = 1;
    cfg.n_ppi = 1;
    cfg.n_macro = 1;
    cfg.T = 30;
    cfg.seed = 7;
    cfg.driver_lead = 1;
    cfg.cointegration = {{1.0}};
    cfg.seasonal_amplitude = 0.0;
    cfg.noise_sd = 0.0;
    cfg.trend_drift = 0.02;
    auto gen = generate_panel(cfg);
    const auto& section = gen.panel.get(section_key(0));
    const auto& driver = gen.panel.get(ppi_key(0));

    // rebasing preserves ratios, so anchoring at t=1 removes the scale:
    // section_t / section_1 must equal driver_{t-1} / driver_0 exactly
    for (int t = 1; t < cfg.T; ++t) {
        double got = section.values[t] / section.values[1];
        double want = driver.values[t - 1] / driver.values[0];
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("generated panels are strictly positive") {
    DgpConfig cfg;
    cfg.T = 50;
    cfg.seed = 31;
    cfg.noise_sd = 0.3;  // violent noise still cannot break log-space positivity
    cfg.trend_drift = -0.05;
    cfg.seasonal_amplitude = 0.2;
    cfg.shock = ShockWindow{{2013, 4}, {2015, 1}, 1.8};
    auto gen = generate_panel(cfg);
    for (const auto& s : gen.panel.series())
        for (double v : s.values) CHECK(v > 0.0);
}

TEST_CASE("shock window multiplies section levels") {
    DgpConfig cfg;
    cfg.n_sections = 1;
    cfg.n_ppi = 1;
    cfg.n_macro = 1;
    cfg.T = 24;
    cfg.seed = 3;
    cfg.noise_sd = 0.0;
    cfg.shock = ShockWindow{{2010, 1}, {2010, 4}, 1.5};
    auto gen = generate_panel(cfg);
    const auto& s = gen.panel.get(section_key(0));
    auto i = s.index_of(Quarter{2010, 1});
    REQUIRE(i.has_value());
    CHECK(s.values[*i] == doctest::Approx(150.0).epsilon(1e-9));
    CHECK(s.values[*i - 1] == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("invalid configs are rejected") {
    DgpConfig cfg;
    cfg.T = 10;
    CHECK_THROWS_AS(generate_panel(cfg), InvalidConfig);
    cfg.T = 30;
    cfg.noise_sd = -1;
    CHECK_THROWS_AS(generate_panel(cfg), InvalidConfig);
    cfg.noise_sd = 0;
    cfg.cointegration = {{1.0}};  // wrong row count for 5 sections
    CHECK_THROWS_AS(generate_panel(cfg), InvalidConfig);
}

TEST_CASE("cointegrated pair with zero error variance is exact") {
    auto p = generate_cointegrated_pair(60, 1.0, 5, /*err_sd=*/0.0);
    const auto& y1 = p.series()[0];
    const auto& y2 = p.series()[1];
    for (size_t t = 0; t < y1.size(); ++t) CHECK(y2.values[t] == doctest::Approx(y1.values[t]));
}

TEST_CASE("cointegrated pair: least squares recovers beta over T=500") {
    auto p = generate_cointegrated_pair(500, 0.8, 12345);
    const auto& y1 = p.series()[0].values;
    const auto& y2 = p.series()[1].values;
    auto fit = stats::ols_univariate(y1, y2);
    CHECK(std::fabs(fit.slope - 0.8) < 0.05);
}

TEST_CASE("pair legs behave like unit roots: level variance grows, difference variance does not") {
    double lv_short = 0, lv_long = 0, dv_short = 0, dv_long = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto p = generate_cointegrated_pair(400, 1.0, 1000 + seed);
        const auto& y = p.series()[0].values;
        std::vector<double> head(y.begin(), y.begin() + 100);
        std::vector<double> all(y.begin(), y.end());
        auto diffs = [](const std::vector<double>& v) {
            std::vector<double> d;
            for (size_t i = 1; i < v.size(); ++i) d.push_back(v[i] - v[i - 1]);
            return d;
        };
        lv_short += stats::variance(head);
        lv_long += stats::variance(all);
        auto dh = diffs(head), da = diffs(all);
        dv_short += stats::variance(dh);
        dv_long += stats::variance(da);
    }
    CHECK(lv_long > 2.0 * lv_short);   // level variance grows with span
    CHECK(dv_long < 2.0 * dv_short);   // difference variance is stable
}

TEST_CASE("cross-correlation of section and driver peaks at the configured lead") {
    DgpConfig cfg;
    cfg.n_sections = 1;
    cfg.n_ppi = 1;
    cfg.n_macro = 1;
    cfg.T = 120;
    cfg.seed = 99;
    cfg.noise_sd = 0.02;
    cfg.driver_noise_scale = 3.0;  // strong driver signal, small section noise
    cfg.driver_lead = 2;
    cfg.cointegration = {{1.0}};
    cfg.seasonal_amplitude = 0.0;
    auto gen = generate_panel(cfg);
    const auto& section = gen.panel.get(section_key(0));
    const auto& driver = gen.panel.get(ppi_key(0));

    // correlate log changes of the section with log changes of the driver
    // shifted by k quarters; the peak must sit at the configured lead
    auto changes = [](const Series& s) {
        std::vector<double> d;
        for (size_t t = 1; t < s.size(); ++t)
            d.push_back(std::log(s.values[t]) - std::log(s.values[t - 1]));
        return d;
    };
    auto ds = changes(section);
    auto dd = changes(driver);
    double best = -2.0;
    int best_lag = -1;
    for (int k = 0; k <= 4; ++k) {
        std::vector<double> a(ds.begin() + k, ds.end());
        std::vector<double> b(dd.begin(), dd.end() - k);
        double r = stats::pearson(a, b);
        if (r > best) {
            best = r;
            best_lag = k;
        }
    }
    CHECK(best_lag == cfg.driver_lead);
    CHECK(best > 0.8);
}
