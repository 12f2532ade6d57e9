#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace psyphy::stats {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Bessel-corrected standard error of the mean; n >= 2.
MeanSe mean_se(std::span<const double> values);
double sample_variance(std::span<const double> values);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double half_width() const { return 0.5 * (hi - lo); }
};

// Two-sided Student-t interval: mean +/- t_{n-1,(1+level)/2} * se.
Interval confidence_interval(std::span<const double> values, double level = 0.95);

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double reg_incomplete_beta(double a, double b, double x);
double log_beta(double a, double b);

// Regularized lower incomplete gamma P(a, x).
double reg_lower_gamma(double a, double x);

double student_t_cdf(double t, double df);
// Inverse of student_t_cdf by bracketing bisection refined with Newton steps.
double student_t_quantile(double p, double df);

double f_sf(double f, double df1, double df2);
double chi_square_sf(double x, double df);

// P(X >= k) for X ~ Binomial(n, p).
double binomial_sf(std::size_t k, std::size_t n, double p);

struct AnovaResult {
    double f = 0.0;
    double df_between = 0.0;
    double df_within = 0.0;
    double p = 1.0;
    double ss_between = 0.0;
    double ss_within = 0.0;
    bool degenerate = false;  // zero within-group variance with unequal means
};

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

// Average ranks (ties share the mean rank), 1-based.
std::vector<double> ranks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

}  // namespace psyphy::stats
