#include "psyphy/stimulus.hpp"

#include <algorithm>
#include <cmath>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"

namespace psyphy {

std::string to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::none: return "none";
        case PerturbationKind::blur: return "blur";
        case PerturbationKind::noise: return "noise";
    }
    return "none";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
    if (s == "none") return PerturbationKind::none;
    if (s == "blur") return PerturbationKind::blur;
    if (s == "noise") return PerturbationKind::noise;
    fail(ErrorCode::invalid_parameter, "unknown perturbation kind '" + s + "'");
}

void PerturbationSpec::validate() const {
    if (level < 0 || level > kMaxLevel) {
        fail(ErrorCode::invalid_parameter,
             "perturbation level " + std::to_string(level) + " outside 0..5");
    }
    if (kind == PerturbationKind::none && level != 0) {
        fail(ErrorCode::invalid_parameter, "perturbation kind none requires level 0");
    }
}

namespace {

void check_level(int level) {
    if (level < 1 || level > kMaxLevel) {
        fail(ErrorCode::invalid_parameter,
             "perturbation level " + std::to_string(level) + " outside 1..5");
    }
}

std::vector<double> gaussian_1d(double sigma) {
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return 0;
    if (static_cast<std::size_t>(i) >= n) return n - 1;
    return static_cast<std::size_t>(i);
}

}  // namespace

double PerturbationSchedule::blur_sigma_for(int level) const {
    check_level(level);
    return blur_sigma[static_cast<std::size_t>(level - 1)];
}

double PerturbationSchedule::noise_sigma_for(int level) const {
    check_level(level);
    return noise_sigma[static_cast<std::size_t>(level - 1)];
}

Kernel gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        fail(ErrorCode::invalid_parameter, "gaussian_kernel: sigma must be positive");
    }
    Kernel k;
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    k.side = 2 * radius + 1;
    k.weights.resize(k.side * k.side);
    double sum = 0.0;
    for (std::size_t y = 0; y < k.side; ++y) {
        const double dy = static_cast<double>(y) - static_cast<double>(radius);
        for (std::size_t x = 0; x < k.side; ++x) {
            const double dx = static_cast<double>(x) - static_cast<double>(radius);
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k.weights[y * k.side + x] = w;
            sum += w;
        }
    }
    for (double& w : k.weights) w /= sum;
    return k;
}

Kernel identity_kernel() { return Kernel{1, {1.0}}; }

Image convolve(const Image& img, const Kernel& kernel) {
    if (kernel.side % 2 == 0 || kernel.weights.size() != kernel.side * kernel.side) {
        fail(ErrorCode::invalid_parameter, "kernel must be square with odd side");
    }
    const auto r = static_cast<std::ptrdiff_t>(kernel.radius());
    Image out(img.width(), img.height());
    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            // Accumulating offsets from the centre pixel keeps flat regions exact.
            const double centre = img.at(x, y);
            double acc = 0.0;
            for (std::ptrdiff_t ky = -r; ky <= r; ++ky) {
                const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + ky, img.height());
                for (std::ptrdiff_t kx = -r; kx <= r; ++kx) {
                    const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + kx, img.width());
                    acc += kernel.at(static_cast<std::size_t>(kx + r), static_cast<std::size_t>(ky + r)) *
                           (img.at(sx, sy) - centre);
                }
            }
            out.at(x, y) = std::clamp(centre + acc, 0.0, 1.0);
        }
    }
    return out;
}

Image gaussian_blur_separable(const Image& img, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        fail(ErrorCode::invalid_parameter, "blur sigma must be positive");
    }
    const auto w = gaussian_1d(sigma);
    const auto r = static_cast<std::ptrdiff_t>(w.size() / 2);
    const std::size_t width = img.width();
    const std::size_t height = img.height();

    std::vector<double> tmp(width * height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double centre = img.at(x, y);
            double acc = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                acc += w[static_cast<std::size_t>(k + r)] *
                       (img.at(clamp_index(static_cast<std::ptrdiff_t>(x) + k, width), y) - centre);
            }
            tmp[y * width + x] = centre + acc;
        }
    }
    Image out(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double centre = tmp[y * width + x];
            double acc = 0.0;
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                acc += w[static_cast<std::size_t>(k + r)] *
                       (tmp[clamp_index(static_cast<std::ptrdiff_t>(y) + k, height) * width + x] - centre);
            }
            out.at(x, y) = std::clamp(centre + acc, 0.0, 1.0);
        }
    }
    return out;
}

Image blur(const Image& img, int level, const PerturbationSchedule& schedule) {
    return gaussian_blur_separable(img, schedule.blur_sigma_for(level));
}

std::vector<double> gaussian_noise_field(std::size_t n, double sigma, std::uint64_t seed) {
    std::vector<double> field(n);
    Engine eng = make_engine(seed);
    for (double& v : field) v = sigma * standard_normal(eng);
    return field;
}

Image add_gaussian_noise_sigma(const Image& img, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        fail(ErrorCode::invalid_parameter, "noise sigma must be non-negative");
    }
    if (sigma == 0.0) return img;
    const auto field = gaussian_noise_field(img.size(), sigma, seed);
    Image out(img.width(), img.height());
    auto src = img.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(src[i] + field[i], 0.0, 1.0);
    return out;
}

Image add_gaussian_noise(const Image& img, int level, std::uint64_t seed,
                         const PerturbationSchedule& schedule) {
    return add_gaussian_noise_sigma(img, schedule.noise_sigma_for(level), seed);
}

Image perturb(const Image& img, const PerturbationSpec& spec,
              const PerturbationSchedule& schedule) {
    spec.validate();
    switch (spec.kind) {
        case PerturbationKind::none: return img;
        case PerturbationKind::blur:
            if (spec.level == 0) return img;
            return blur(img, spec.level, schedule);
        case PerturbationKind::noise:
            if (spec.level == 0) return img;
            return add_gaussian_noise(img, spec.level, spec.seed, schedule);
    }
    return img;
}

}  // namespace psyphy
