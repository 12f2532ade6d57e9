#include "psyphy/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "psyphy/error.hpp"

namespace psyphy::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 10000;

void require_n(std::span<const double> values, std::size_t n, const char* what) {
    if (values.size() < n) {
        fail(ErrorCode::insufficient_data,
             std::string(what) + " needs at least " + std::to_string(n) + " values, got " +
                 std::to_string(values.size()));
    }
}

// Modified Lentz evaluation of the continued fraction for I_x(a,b).
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    return h;
}

// Returns (P, Q) of the regularized incomplete gamma.
std::pair<double, double> incomplete_gamma(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) fail(ErrorCode::invalid_parameter, "incomplete gamma needs a > 0, x >= 0");
    if (x == 0.0) return {0.0, 1.0};
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, del = 1.0 / a, sum = del;
        for (int n = 0; n < kMaxIter; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * kEps) break;
        }
        const double p = sum * std::exp(log_prefix);
        return {p, 1.0 - p};
    }
    double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    const double q = std::exp(log_prefix) * h;
    return {1.0 - q, q};
}

}  // namespace

double sample_variance(std::span<const double> values) {
    require_n(values, 2, "sample variance");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / (n - 1.0);
}

MeanSe mean_se(std::span<const double> values) {
    require_n(values, 2, "mean_se");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    return {mean, std::sqrt(sample_variance(values) / static_cast<double>(values.size()))};
}

Interval confidence_interval(std::span<const double> values, double level) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::invalid_parameter, "confidence level must lie in (0,1)");
    const auto [mean, se] = mean_se(values);
    const double t = student_t_quantile(0.5 * (1.0 + level), static_cast<double>(values.size() - 1));
    return {mean - t * se, mean + t * se};
}

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double reg_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) fail(ErrorCode::invalid_parameter, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::invalid_parameter, "incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double reg_lower_gamma(double a, double x) { return incomplete_gamma(a, x).first; }

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) fail(ErrorCode::invalid_parameter, "t distribution needs df > 0");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::invalid_parameter, "quantile probability must lie in (0,1)");
    if (p == 0.5) return 0.0;
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    while (student_t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 400 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double f_sf(double f, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) fail(ErrorCode::invalid_parameter, "F distribution needs positive dfs");
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    return reg_incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

double chi_square_sf(double x, double df) {
    if (!(df > 0.0)) fail(ErrorCode::invalid_parameter, "chi-square needs df > 0");
    if (!(x > 0.0)) return 1.0;
    return incomplete_gamma(0.5 * df, 0.5 * x).second;
}

double binomial_sf(std::size_t k, std::size_t n, double p) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::invalid_parameter, "binomial p must lie in [0,1]");
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    return reg_incomplete_beta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) fail(ErrorCode::insufficient_data, "ANOVA needs at least 2 groups");
    std::size_t total_n = 0;
    double grand = 0.0;
    std::vector<double> means;
    for (const auto& g : groups) {
        if (g.size() < 2) fail(ErrorCode::insufficient_data, "every ANOVA group needs at least 2 values");
        double s = 0.0;
        for (double v : g) s += v;
        means.push_back(s / static_cast<double>(g.size()));
        grand += s;
        total_n += g.size();
    }
    grand /= static_cast<double>(total_n);

    AnovaResult r;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double d = means[i] - grand;
        r.ss_between += static_cast<double>(groups[i].size()) * d * d;
        for (double v : groups[i]) r.ss_within += (v - means[i]) * (v - means[i]);
    }
    r.df_between = static_cast<double>(groups.size() - 1);
    r.df_within = static_cast<double>(total_n - groups.size());

    const bool means_equal = std::all_of(means.begin(), means.end(), [&](double m) { return m == means[0]; });
    if (means_equal) {
        r.ss_between = 0.0;
        r.f = 0.0;
        r.p = 1.0;
        return r;
    }
    if (r.ss_within == 0.0) {
        r.f = std::numeric_limits<double>::infinity();
        r.p = 0.0;
        r.degenerate = true;
        return r;
    }
    r.f = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
    r.p = f_sf(r.f, r.df_between, r.df_within);
    return r;
}

std::vector<double> ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> r(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::insufficient_data, "correlation needs paired samples, n >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

double median(std::vector<double> values) {
    if (values.empty()) fail(ErrorCode::insufficient_data, "median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace psyphy::stats
