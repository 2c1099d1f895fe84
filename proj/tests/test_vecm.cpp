#include <doctest.h>

#include <cmath>

#include "mpf/errors.hpp"
#include "mpf/pca.hpp"
#include "mpf/rng.hpp"
#include "mpf/stats.hpp"
#include "mpf/synthetic.hpp"
#include "mpf/vecm.hpp"

using namespace mpf;
using mpf::pca::pca_fit;
using mpf::pca::pca_transform;

TEST_CASE("pca on axis-aligned data recovers the axes and variances") {
    Rng rng(1);
    int n = 4000;
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 2.0 * rng.normal();  // variance 4
        X(i, 1) = rng.normal();        // variance 1
    }
    auto model = pca_fit(X, 2);
    REQUIRE(model.retained() == 2);
    CHECK(model.explained_variance(0) == doctest::Approx(4.0).epsilon(0.1));
    CHECK(model.explained_variance(1) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::fabs(model.loadings(0, 0)) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::fabs(model.loadings(1, 1)) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(model.explained_variance(0) >= model.explained_variance(1));
}

TEST_CASE("pca transform of the column means is the zero score") {
    Rng rng(2);
    Eigen::MatrixXd X(50, 3);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform(0, 10) + 3.0 * j;
    auto model = pca_fit(X, 3);
    Eigen::MatrixXd means(1, 3);
    means.row(0) = X.colwise().mean();
    auto score = pca_transform(model, means);
    for (Eigen::Index j = 0; j < score.cols(); ++j) CHECK(std::fabs(score(0, j)) < 1e-10);
}

TEST_CASE("full-rank pca reconstruction and truncation error") {
    Rng rng(3);
    int n = 200, p = 5;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal(0, 1.0 + j);
    auto model = pca_fit(X, p);
    REQUIRE(model.retained() == p);

    Eigen::MatrixXd centered = X.rowwise() - model.means.transpose();
    Eigen::MatrixXd scores = pca_transform(model, X);
    Eigen::MatrixXd recon = scores * model.loadings.transpose();
    CHECK((recon - centered).cwiseAbs().maxCoeff() < 1e-9);

    // mean squared truncation error of a k-component reconstruction equals
    // the sum of the discarded eigenvalues (up to the n-1 normalization)
    int k = 2;
    Eigen::MatrixXd rec_k =
        scores.leftCols(k) * model.loadings.leftCols(k).transpose();
    double frob = (centered - rec_k).squaredNorm() / static_cast<double>(n - 1);
    double discarded = model.explained_variance.tail(p - k).sum();
    CHECK(frob == doctest::Approx(discarded).epsilon(1e-9));

    // scores on the fit set are uncorrelated
    Eigen::MatrixXd cov = scores.transpose() * scores / static_cast<double>(n - 1);
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
            if (a != b) CHECK(std::fabs(cov(a, b)) < 1e-8);
}

TEST_CASE("rank-deficient pca retains fewer components and flags it") {
    Rng rng(4);
    Eigen::MatrixXd X(100, 3);
    for (int i = 0; i < 100; ++i) {
        double v = rng.normal();
        X(i, 0) = v;
        X(i, 1) = 2.0 * v;  // collinear
        X(i, 2) = rng.normal();
    }
    auto model = pca_fit(X, 3);
    CHECK(model.retained() == 2);
    CHECK(model.rank_deficient);
}

namespace {

vecm::VecmParams fit_pair(double beta, std::uint64_t seed, int T = 500) {
    auto panel = generate_cointegrated_pair(T, beta, seed);
    Eigen::MatrixXd Y(T, 2);
    std::vector<Quarter> axis;
    const auto& y1 = panel.series()[0];
    const auto& y2 = panel.series()[1];
    for (int t = 0; t < T; ++t) {
        // target first: y2 = beta*y1 + stationary, so beta_coint ~ (1, -beta)
        Y(t, 0) = y2.values[static_cast<size_t>(t)];
        Y(t, 1) = y1.values[static_cast<size_t>(t)];
        axis.push_back(y1.quarter_at(static_cast<size_t>(t)));
    }
    vecm::VecmConfig cfg;
    cfg.seasonal_indicator = false;
    return vecm::johansen_fit(Y, axis, cfg);
}

}  // namespace

TEST_CASE("johansen recovers the cointegration vector") {
    std::vector<double> second_elems;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        second_elems.push_back(fit_pair(1.0, 9000 + seed).beta_coint(1));
    CHECK(std::fabs(stats::median(second_elems) - (-1.0)) < 0.1);
}

TEST_CASE("identical series make the system singular") {
    int T = 100;
    Eigen::MatrixXd Y(T, 2);
    std::vector<Quarter> axis;
    Rng rng(5);
    double level = 100;
    for (int t = 0; t < T; ++t) {
        level += rng.normal();
        Y(t, 0) = level;
        Y(t, 1) = level;
        axis.push_back(Quarter{2000, 1}.plus(t));
    }
    vecm::VecmConfig cfg;
    cfg.seasonal_indicator = false;
    CHECK_THROWS_AS(vecm::johansen_fit(Y, axis, cfg), NearSingular);
}

TEST_CASE("independent random walks rarely show significant adjustment") {
    // evidence for a nonzero error-correction loading is read off the
    // Johansen max-eigenvalue statistic; 11.44 is the tabulated 5% critical
    // value for two variables with no deterministic terms
    int significant = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(40000 + seed);
        int T = 500;
        Eigen::MatrixXd Y(T, 2);
        std::vector<Quarter> axis;
        double a = 100, b = 100;
        for (int t = 0; t < T; ++t) {
            a += rng.normal();
            b += rng.normal();
            Y(t, 0) = a;
            Y(t, 1) = b;
            axis.push_back(Quarter{2000, 1}.plus(t));
        }
        vecm::VecmConfig cfg;
        cfg.seasonal_indicator = false;
        vecm::VecmParams params;
        try {
            params = vecm::johansen_fit(Y, axis, cfg);
        } catch (const NearSingular&) {
            continue;
        }
        ++total;
        double lambda_max = -(T - 2) * std::log(1.0 - params.eigenvalues[0]);
        if (lambda_max > 11.44) ++significant;
    }
    REQUIRE(total >= 45);
    CHECK(static_cast<double>(total - significant) / total >= 0.90);
}

TEST_CASE("zero dynamics forecast a constant path") {
    vecm::VecmParams params;
    params.alpha = Eigen::VectorXd::Zero(2);
    params.beta_coint = Eigen::VectorXd::Zero(2);
    params.beta_coint(0) = 1;
    params.Pi = Eigen::MatrixXd::Zero(2, 2);
    params.Gamma1 = Eigen::MatrixXd::Zero(2, 2);
    params.exog_coefs = Eigen::MatrixXd::Zero(2, 0);
    params.resid_cov = Eigen::MatrixXd::Identity(2, 2);
    params.seasonal = false;

    vecm::VecmState state;
    state.y_last = Eigen::VectorXd::Constant(2, 123.0);
    state.dy_last = Eigen::VectorXd::Constant(2, 5.0);
    state.last_quarter = Quarter{2020, 1};
    auto path = vecm::vecm_forecast(params, state, 10);
    REQUIRE(path.rows() == 10);
    for (int h = 0; h < 10; ++h)
        for (int j = 0; j < 2; ++j) CHECK(path(h, j) == 123.0);
}

TEST_CASE("forecast path prefix is stable") {
    auto params = fit_pair(1.0, 321);
    auto panel = generate_cointegrated_pair(500, 1.0, 321);
    Eigen::MatrixXd Y(500, 2);
    std::vector<Quarter> axis;
    for (int t = 0; t < 500; ++t) {
        Y(t, 0) = panel.series()[1].values[static_cast<size_t>(t)];
        Y(t, 1) = panel.series()[0].values[static_cast<size_t>(t)];
        axis.push_back(panel.series()[0].quarter_at(static_cast<size_t>(t)));
    }
    auto state = vecm::last_state(Y, axis);
    auto one = vecm::vecm_forecast(params, state, 1);
    auto ten = vecm::vecm_forecast(params, state, 10);
    CHECK(one(0, 0) == ten(0, 0));
    CHECK(one(0, 1) == ten(0, 1));
}

TEST_CASE("forecasts are pulled toward the long-run relation") {
    double dis_first = 0.0, dis_last = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        int T = 400;
        auto panel = generate_cointegrated_pair(T, 1.0, 777 + seed, /*err_sd=*/0.5);
        Eigen::MatrixXd Y(T, 2);
        std::vector<Quarter> axis;
        for (int t = 0; t < T; ++t) {
            Y(t, 0) = panel.series()[1].values[static_cast<size_t>(t)];
            Y(t, 1) = panel.series()[0].values[static_cast<size_t>(t)];
            axis.push_back(panel.series()[0].quarter_at(static_cast<size_t>(t)));
        }
        vecm::VecmConfig cfg;
        cfg.seasonal_indicator = false;
        auto params = vecm::johansen_fit(Y, axis, cfg);
        auto state = vecm::last_state(Y, axis);
        auto path = vecm::vecm_forecast(params, state, 10);
        dis_first += std::fabs(params.beta_coint.dot(path.row(0)));
        dis_last += std::fabs(params.beta_coint.dot(path.row(9)));
    }
    CHECK(dis_last < dis_first);
}

TEST_CASE("pi equals alpha beta-transpose exactly as stored") {
    auto params = fit_pair(0.7, 55);
    Eigen::MatrixXd outer = params.alpha * params.beta_coint.transpose();
    CHECK((params.Pi - outer).cwiseAbs().maxCoeff() == 0.0);
    CHECK(params.beta_coint(0) == 1.0);
}
