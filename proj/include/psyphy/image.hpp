#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace psyphy {

// Grayscale intensity grid, row-major, intensities in [0,1].
class Image {
public:
    Image() = default;
    Image(std::size_t width, std::size_t height, double fill = 0.0);
    Image(std::size_t width, std::size_t height, std::vector<double> pixels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
    double& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    double mean() const;
    double variance() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
};

// 8-bit grayscale PNG; intensities map to [0,1] by /255. Color or 16-bit
// inputs are converted to 8-bit gray on read.
Image read_png(const std::filesystem::path& path);
Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

// Area-averaging resample (box filter with fractional pixel overlap).
Image downsample_area(const Image& img, std::size_t out_width, std::size_t out_height);

}  // namespace psyphy
