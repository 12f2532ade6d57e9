#include <doctest.h>

#include <cmath>
#include <numeric>

#include "psyphy/error.hpp"
#include "psyphy/loss.hpp"
#include "psyphy/rng.hpp"

using namespace psyphy;

TEST_CASE("softmax sums to one and is shift invariant") {
    const std::vector<double> z{1.0, -2.0, 0.5, 3.0};
    const auto p = softmax(z);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    double denom = 0;
    for (double v : z) denom += std::exp(v);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(p[i] == doctest::Approx(std::exp(z[i]) / denom).epsilon(1e-14));
    const auto shifted = softmax(std::vector<double>{1001.0, 998.0, 1000.5, 1003.0});
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(shifted[i] == doctest::Approx(p[i]).epsilon(1e-12));
    const auto huge = softmax(std::vector<double>{1e308, -1e308});
    CHECK(huge[0] == 1.0);
    CHECK(huge[1] == 0.0);
}

TEST_CASE("argmax ties are reported") {
    CHECK(unique_argmax(std::vector<double>{0.1, 0.7, 0.2}) == 1);
    CHECK(unique_argmax(std::vector<double>{0.4, 0.4, 0.2}) == 3);
    CHECK_FALSE(prediction_correct(std::vector<double>{0.4, 0.4, 0.2}, 0));
    CHECK(prediction_correct(std::vector<double>{0.5, 0.3, 0.2}, 0));
}

TEST_CASE("cross entropy and its clamp") {
    const std::vector<double> p{0.25, 0.75};
    CHECK(cross_entropy(p, 1) == doctest::Approx(-std::log(0.75)));
    CHECK(cross_entropy(p, std::vector<double>{1.0, 0.0}) == doctest::Approx(-std::log(0.25)));
    CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
    CHECK(cross_entropy(std::vector<double>{1.0, 1e-300}, 1) == doctest::Approx(-std::log(1e-12)));
    CHECK_THROWS_AS(cross_entropy(p, 2), Error);
    CHECK_THROWS_AS(cross_entropy(p, std::vector<double>{1.0, 1.0}), Error);
    CHECK_THROWS_AS(cross_entropy(p, std::vector<double>{0.5, 0.5}), Error);
    CHECK_THROWS_AS(cross_entropy(p, std::vector<double>{1.0}), Error);
}

TEST_CASE("penalty is m - r") {
    CHECK(penalty(0.25) == 0.75);
    CHECK(penalty(2.0, 5.0) == 3.0);
    CHECK_THROWS_AS(penalty(-0.1), Error);
    CHECK_THROWS_AS(penalty(1.5), Error);
    CHECK_THROWS_AS(PenaltyConfig({0.0, true, 1.0}).validate(), Error);
}

TEST_CASE("loss branches") {
    const std::vector<double> right{0.7, 0.2, 0.1};
    const std::vector<double> wrong{0.2, 0.7, 0.1};
    const PenaltyConfig cfg{2.0, true, 1.0};
    CHECK(psychophysical_loss(right, 0, 0.3, cfg) == cross_entropy(right, 0));
    CHECK(psychophysical_loss(wrong, 0, 0.3, cfg) == 0.3 * 2.0 * cross_entropy(wrong, 0));
    const PenaltyConfig literal{2.0, false, 1.0};
    CHECK(psychophysical_loss(right, 0, 0.3, literal) == 0.3 * 2.0 * cross_entropy(right, 0));
    CHECK(sample_weight(right, 0, 0.3, cfg) == 1.0);
    CHECK(sample_weight(wrong, 0, 0.3, cfg) == 0.3 * 2.0);
    // z = 0 silences misclassified samples.
    CHECK(psychophysical_loss(wrong, 0, 0.0, cfg) == 0.0);
    CHECK_THROWS_AS(psychophysical_loss(wrong, 0, 1.5, cfg), Error);
}

TEST_CASE("gradient matches central differences") {
    Engine e = make_engine(17);
    int checked = 0;
    while (checked < 300) {
        const std::size_t k = 2 + uniform_index(e, 8);
        std::vector<double> z(k);
        for (double& v : z) v = 2.0 * standard_normal(e);
        const std::size_t y = uniform_index(e, k);
        const PenaltyConfig cfg{0.1 + 3 * uniform01(e), uniform01(e) < 0.7, 1.0};
        const double zz = uniform01(e);
        const double h = 1e-5;
        const auto g = loss_gradient(z, y, zz, cfg);
        const bool branch = prediction_correct(softmax(z), y);
        bool stable = true;
        std::vector<double> fd(k);
        for (std::size_t i = 0; i < k; ++i) {
            auto zp = z, zm = z;
            zp[i] += h;
            zm[i] -= h;
            const auto pp = softmax(zp), pm = softmax(zm);
            if (prediction_correct(pp, y) != branch || prediction_correct(pm, y) != branch) stable = false;
            fd[i] = (psychophysical_loss(pp, y, zz, cfg) - psychophysical_loss(pm, y, zz, cfg)) / (2 * h);
        }
        if (!stable) continue;
        double num = 0, den = 0;
        for (std::size_t i = 0; i < k; ++i) {
            num += (fd[i] - g[i]) * (fd[i] - g[i]);
            den = std::max(den, std::max(std::abs(fd[i]), std::abs(g[i])));
        }
        CHECK(std::sqrt(num) / std::max(den, 1e-8) < 1e-5);
        ++checked;
    }
}

TEST_CASE("gradient rejects non-finite logits and bad labels") {
    const PenaltyConfig cfg;
    CHECK_THROWS_AS(loss_gradient(std::vector<double>{1.0, NAN}, 0, 0.5, cfg), Error);
    CHECK_THROWS_AS(loss_gradient(std::vector<double>{1.0, INFINITY}, 0, 0.5, cfg), Error);
    CHECK_THROWS_AS(loss_gradient(std::vector<double>{1.0, 2.0}, 5, 0.5, cfg), Error);
    const auto g = loss_gradient(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 1.0}, 0.5, cfg);
    CHECK(g.size() == 2);
    CHECK(g[0] + g[1] == doctest::Approx(0.0).epsilon(1e-15));
}
