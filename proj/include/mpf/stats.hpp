#pragma once

#include <span>
#include <vector>

namespace mpf::stats {

double mean(std::span<const double> x);
// sample variance / sd (n-1 denominator)
double variance(std::span<const double> x);
double sd(std::span<const double> x);

// linear-interpolation quantile between order statistics (R type 7);
// p in [0, 1], x need not be sorted
double quantile(std::span<const double> x, double p);
double median(std::span<const double> x);
double iqr(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);
// Spearman rank correlation; ties get average ranks
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

struct UnivariateFit {
    double intercept = 0.0;
    double slope = 0.0;
    double ssr = 0.0;  // sum of squared residuals
};
// OLS of y on a single column plus intercept
UnivariateFit ols_univariate(std::span<const double> x, std::span<const double> y);

// standard normal quantile (inverse CDF), Acklam's rational approximation
// refined by one Halley step; |error| < 1e-14 over (0, 1)
double normal_quantile(double p);
double normal_cdf(double x);

// Student-t CDF with nu degrees of freedom, via the regularized incomplete
// beta function (continued fraction)
double student_t_cdf(double t, double nu);

double incomplete_beta(double a, double b, double x);

}  // namespace mpf::stats
