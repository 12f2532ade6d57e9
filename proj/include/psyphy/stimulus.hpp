#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "psyphy/image.hpp"

namespace psyphy {

enum class PerturbationKind { none, blur, noise };

std::string to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(const std::string& s);

inline constexpr int kMaxLevel = 5;

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::none;
    int level = 0;           // 0 = identity, 1..5 otherwise
    std::uint64_t seed = 0;  // noise only

    void validate() const;
    friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

// Per-level sigma tables. Blur sigma is in pixels, noise sigma in normalized
// intensity units.
struct PerturbationSchedule {
    std::array<double, kMaxLevel> blur_sigma{0.5, 1.0, 2.0, 4.0, 8.0};
    std::array<double, kMaxLevel> noise_sigma{0.05, 0.10, 0.20, 0.30, 0.40};

    double blur_sigma_for(int level) const;
    double noise_sigma_for(int level) const;
};

struct Kernel {
    std::size_t side = 1;
    std::vector<double> weights;  // row-major, side*side

    std::size_t radius() const noexcept { return side / 2; }
    double at(std::size_t x, std::size_t y) const { return weights[y * side + x]; }
};

// side = 2*ceil(3*sigma)+1, weights normalized to sum 1.
Kernel gaussian_kernel(double sigma);
Kernel identity_kernel();

// 2-D convolution with edge replication, output clamped to [0,1].
Image convolve(const Image& img, const Kernel& kernel);
// Same result for a Gaussian kernel via two 1-D passes.
Image gaussian_blur_separable(const Image& img, double sigma);

Image blur(const Image& img, int level, const PerturbationSchedule& schedule = {});
Image add_gaussian_noise(const Image& img, int level, std::uint64_t seed,
                         const PerturbationSchedule& schedule = {});
// Unclamped additive noise field: n draws of sigma * N(0,1) from seed.
std::vector<double> gaussian_noise_field(std::size_t n, double sigma, std::uint64_t seed);
// Noise with an explicit sigma; sigma == 0 is the identity.
Image add_gaussian_noise_sigma(const Image& img, double sigma, std::uint64_t seed);

Image perturb(const Image& img, const PerturbationSpec& spec,
              const PerturbationSchedule& schedule = {});

}  // namespace psyphy
