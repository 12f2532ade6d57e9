#include "psyphy/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "psyphy/error.hpp"

namespace psyphy {

Image::Image(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

Image::Image(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != width_ * height_) {
        fail(ErrorCode::invalid_input, "image pixel count " + std::to_string(pixels_.size()) +
                                           " does not match " + std::to_string(width_) + "x" +
                                           std::to_string(height_));
    }
    for (double v : pixels_) {
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::invalid_input, "image intensity outside [0,1]");
    }
}

double Image::mean() const {
    if (pixels_.empty()) return 0.0;
    double s = 0.0;
    for (double v : pixels_) s += v;
    return s / static_cast<double>(pixels_.size());
}

double Image::variance() const {
    if (pixels_.empty()) return 0.0;
    const double mu = mean();
    double s = 0.0;
    for (double v : pixels_) s += (v - mu) * (v - mu);
    return s / static_cast<double>(pixels_.size());
}

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void read_from_cursor(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->offset + n > cur->bytes.size()) png_error(png, "truncated PNG data");
    std::memcpy(out, cur->bytes.data() + cur->offset, n);
    cur->offset += n;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
    throw Error(ErrorCode::io_error, std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        fail(ErrorCode::io_error, "not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                             png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    ReadCursor cursor{bytes, 0};
    png_set_read_fn(png, &cursor, read_from_cursor);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != width) fail(ErrorCode::io_error, "unsupported PNG pixel layout");
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    std::vector<double> pixels(raw.size());
    std::transform(raw.begin(), raw.end(), pixels.begin(),
                   [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
    return Image(width, height, std::move(pixels));
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.empty()) fail(ErrorCode::invalid_input, "cannot encode an empty image");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                              png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    std::vector<std::uint8_t> out;
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(img.width());
    for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            const double v = std::clamp(img.at(x, y), 0.0, 1.0);
            row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io_error, "short write to " + path.string());
}

Image downsample_area(const Image& img, std::size_t out_width, std::size_t out_height) {
    if (img.empty() || out_width == 0 || out_height == 0) {
        fail(ErrorCode::invalid_parameter, "downsample_area: empty input or output");
    }
    const double sx = static_cast<double>(img.width()) / static_cast<double>(out_width);
    const double sy = static_cast<double>(img.height()) / static_cast<double>(out_height);
    Image out(out_width, out_height);
    for (std::size_t oy = 0; oy < out_height; ++oy) {
        const double y0 = static_cast<double>(oy) * sy;
        const double y1 = y0 + sy;
        for (std::size_t ox = 0; ox < out_width; ++ox) {
            const double x0 = static_cast<double>(ox) * sx;
            const double x1 = x0 + sx;
            double acc = 0.0;
            double area = 0.0;
            const auto iy_end = std::min<std::size_t>(img.height(), static_cast<std::size_t>(std::ceil(y1)));
            const auto ix_end = std::min<std::size_t>(img.width(), static_cast<std::size_t>(std::ceil(x1)));
            for (auto iy = static_cast<std::size_t>(std::floor(y0)); iy < iy_end; ++iy) {
                const double wy = std::min(y1, static_cast<double>(iy + 1)) -
                                  std::max(y0, static_cast<double>(iy));
                if (wy <= 0.0) continue;
                for (auto ix = static_cast<std::size_t>(std::floor(x0)); ix < ix_end; ++ix) {
                    const double wx = std::min(x1, static_cast<double>(ix + 1)) -
                                      std::max(x0, static_cast<double>(ix));
                    if (wx <= 0.0) continue;
                    acc += wx * wy * img.at(ix, iy);
                    area += wx * wy;
                }
            }
            out.at(ox, oy) = std::clamp(acc / area, 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace psyphy
