#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"
#include "psyphy/stats.hpp"

using namespace psyphy;
using namespace psyphy::stats;

TEST_CASE("mean and standard error") {
    const auto a = mean_se(std::vector<double>{0.5, 0.5, 0.5});
    CHECK(a.mean == 0.5);
    CHECK(a.se == 0.0);
    const auto b = mean_se(std::vector<double>{0.0, 1.0});
    CHECK(b.mean == 0.5);
    CHECK(b.se == doctest::Approx(0.5).epsilon(1e-15));

    Engine e = make_engine(1);
    std::vector<double> v(5);
    for (double& x : v) x = uniform01(e);
    double m = 0;
    for (double x : v) m += x;
    m /= 5;
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const auto c = mean_se(v);
    CHECK(std::abs(c.mean - m) < 1e-12);
    CHECK(std::abs(c.se - std::sqrt(ss / 4) / std::sqrt(5.0)) < 1e-12);
    CHECK_THROWS_AS(mean_se(std::vector<double>{1.0}), Error);
}

TEST_CASE("t interval") {
    const std::vector<double> v{0.61, 0.64, 0.59, 0.66, 0.60};
    const auto ms = mean_se(v);
    const auto ci = confidence_interval(v);
    CHECK(std::abs(ci.half_width() / ms.se - 2.776) < 1e-3);
    CHECK(ci.lo < ms.mean);
    CHECK(ci.hi > ms.mean);
    const auto flat = confidence_interval(std::vector<double>{0.3, 0.3, 0.3});
    CHECK(flat.lo == 0.3);
    CHECK(flat.hi == 0.3);
    CHECK_THROWS_AS(confidence_interval(v, 1.0), Error);
    CHECK_THROWS_AS(confidence_interval(v, 0.0), Error);
}

TEST_CASE("incomplete beta against boost") {
    CHECK(reg_incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(reg_incomplete_beta(2, 3, 1.0) == 1.0);
    CHECK(reg_incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(std::abs(reg_incomplete_beta(2, 2, 0.5) - 0.5) < 1e-14);
    Engine e = make_engine(2);
    for (int i = 0; i < 2000; ++i) {
        const double a = 0.1 + 50 * uniform01(e);
        const double b = 0.1 + 50 * uniform01(e);
        const double x = uniform01(e);
        const double got = reg_incomplete_beta(a, b, x);
        REQUIRE(std::abs(got - boost::math::ibeta(a, b, x)) < 1e-10);
        REQUIRE(std::abs(got + reg_incomplete_beta(b, a, 1 - x) - 1.0) < 1e-10);
    }
    CHECK_THROWS_AS(reg_incomplete_beta(0, 1, 0.5), Error);
    CHECK_THROWS_AS(reg_incomplete_beta(1, 1, 1.5), Error);
}

TEST_CASE("incomplete gamma against boost") {
    Engine e = make_engine(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = 0.1 + 40 * uniform01(e);
        const double x = 60 * uniform01(e);
        REQUIRE(std::abs(reg_lower_gamma(a, x) - boost::math::gamma_p(a, x)) < 1e-10);
    }
}

TEST_CASE("distribution functions against boost") {
    for (double df : {1.0, 2.0, 4.0, 9.5, 30.0, 200.0}) {
        boost::math::students_t t(df);
        for (double x : {-6.0, -2.0, -0.3, 0.0, 0.7, 2.5, 8.0}) {
            CHECK(std::abs(student_t_cdf(x, df) - boost::math::cdf(t, x)) < 1e-10);
        }
        for (double p : {0.01, 0.2, 0.5, 0.9, 0.975, 0.999}) {
            CHECK(std::abs(student_t_quantile(p, df) - boost::math::quantile(t, p)) < 1e-7);
        }
        boost::math::chi_squared c(df);
        for (double x : {0.1, 1.0, 5.0, 20.0}) {
            CHECK(std::abs(chi_square_sf(x, df) - boost::math::cdf(boost::math::complement(c, x))) < 1e-10);
        }
    }
    CHECK(std::abs(student_t_quantile(0.975, 4) - 2.776) < 1e-3);
    for (auto [d1, d2] : std::vector<std::pair<double, double>>{{2, 12}, {3, 10}, {1, 1}, {5, 100}}) {
        boost::math::fisher_f f(d1, d2);
        for (double x : {0.0, 0.5, 1.0, 3.0, 10.0, 50.0}) {
            CHECK(std::abs(f_sf(x, d1, d2) - boost::math::cdf(boost::math::complement(f, x))) < 1e-10);
        }
    }
}

TEST_CASE("binomial tail against direct summation") {
    for (std::size_t n : {1u, 10u, 100u}) {
        for (double p : {0.3, 0.5, 0.8}) {
            for (std::size_t k = 0; k <= n; ++k) {
                double direct = 0;
                for (std::size_t j = k; j <= n; ++j) {
                    direct += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                                       j * std::log(p) + (n - j) * std::log1p(-p));
                }
                REQUIRE(std::abs(binomial_sf(k, n, p) - direct) < 1e-10);
            }
        }
    }
    CHECK(binomial_sf(0, 10, 0.5) == 1.0);
    CHECK(binomial_sf(11, 10, 0.5) == 0.0);
}

namespace {

AnovaResult brute_anova(const std::vector<std::vector<double>>& g) {
    double grand = 0;
    std::size_t n = 0;
    for (const auto& x : g)
        for (double v : x) {
            grand += v;
            ++n;
        }
    grand /= n;
    double ssb = 0, ssw = 0;
    for (const auto& x : g) {
        double m = 0;
        for (double v : x) m += v;
        m /= x.size();
        ssb += x.size() * (m - grand) * (m - grand);
        for (double v : x) ssw += (v - m) * (v - m);
    }
    AnovaResult r;
    r.df_between = g.size() - 1.0;
    r.df_within = n - double(g.size());
    r.ss_between = ssb;
    r.ss_within = ssw;
    r.f = (ssb / r.df_between) / (ssw / r.df_within);
    boost::math::fisher_f f(r.df_between, r.df_within);
    r.p = boost::math::cdf(boost::math::complement(f, r.f));
    return r;
}

}  // namespace

TEST_CASE("anova matches the definitional computation") {
    const std::vector<std::vector<double>> g{{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
    const auto r = one_way_anova(g);
    const auto o = brute_anova(g);
    CHECK(std::abs(r.f - o.f) < 1e-9);
    CHECK(std::abs(r.p - o.p) < 1e-9);
    CHECK(r.f == doctest::Approx(3.0));
    CHECK(r.df_between == 2);
    CHECK(r.df_within == 6);

    Engine e = make_engine(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::vector<double>> groups(2 + uniform_index(e, 4));
        for (auto& grp : groups) {
            grp.resize(2 + uniform_index(e, 6));
            const double shift = uniform01(e);
            for (double& v : grp) v = shift + standard_normal(e);
        }
        const auto a = one_way_anova(groups);
        const auto b = brute_anova(groups);
        REQUIRE(std::abs(a.f - b.f) < 1e-9 * std::max(1.0, b.f));
        REQUIRE(std::abs(a.p - b.p) < 1e-9);
        REQUIRE(a.p >= 0.0);
        REQUIRE(a.p <= 1.0);
    }
}

TEST_CASE("anova edge cases and invariances") {
    const auto same = one_way_anova({{1, 2, 3}, {1, 2, 3}});
    CHECK(same.f == 0.0);
    CHECK(same.p == 1.0);
    const auto base = one_way_anova({{1, 2, 4}, {2, 5, 6}, {0, 1, 1}});
    const auto shifted = one_way_anova({{101, 102, 104}, {102, 105, 106}, {100, 101, 101}});
    CHECK(shifted.f == doctest::Approx(base.f).epsilon(1e-9));
    const auto degenerate = one_way_anova({{1, 1}, {2, 2}});
    CHECK(degenerate.degenerate);
    CHECK(degenerate.p == 0.0);
    CHECK_THROWS_AS(one_way_anova({{1, 2}}), Error);
    CHECK_THROWS_AS(one_way_anova({{1, 2}, {3}}), Error);
    // p decreases as F grows.
    double last = 1.0;
    for (double f = 0.1; f < 20; f *= 1.5) {
        const double p = f_sf(f, 2, 12);
        CHECK(p < last);
        last = p;
    }
}

TEST_CASE("ranks and correlations") {
    CHECK(ranks(std::vector<double>{10, 30, 20, 20}) == std::vector<double>{1, 4, 2.5, 2.5});
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> y{2, 4, 6, 8, 10.5};
    CHECK(pearson(x, y) == doctest::Approx(0.998868).epsilon(1e-5));
    CHECK(spearman(x, y) == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman(x, std::vector<double>{1, 8, 27, 64, 125}) == doctest::Approx(1.0));
    CHECK(median(std::vector<double>{3, 1, 2}) == 2);
    CHECK(median(std::vector<double>{4, 1, 2, 3}) == 2.5);
}
