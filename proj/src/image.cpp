#include "ram/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <Eigen/Geometry>
#include <png.h>

namespace ram {
namespace fs = std::filesystem;

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<long>(i));
}

Rgb RgbImage::at(int u, int v) const {
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int u, int v, Rgb color) {
    if (u < 0 || v < 0 || u >= width || v >= height) return;
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    std::copy(color.begin(), color.end(), pixels.begin() + static_cast<long>(i));
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RgbImage read_png(const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::IoError, "libpng initialization failed");
    }
    RgbImage image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::IoError, "malformed PNG " + path.string(), path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const png_byte colorType = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (colorType == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (colorType == PNG_COLOR_TYPE_GRAY || colorType == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (colorType & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    image = RgbImage(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(image.width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::IoError, "unsupported PNG layout in " + path.string(), path.string());
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    for (int v = 0; v < image.height; ++v) rows[static_cast<std::size_t>(v)] = image.pixels.data() + static_cast<std::size_t>(v) * image.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const RgbImage& image, const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "failed writing PNG " + path.string(), path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    png_write_info(png, info);
    for (int v = 0; v < image.height; ++v) {
        png_write_row(png, image.pixels.data() + static_cast<std::size_t>(v) * image.width * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RgbImage render_depth(const DepthImage& depth) {
    RgbImage img(depth.width(), depth.height());
    float lo = std::numeric_limits<float>::infinity();
    float hi = 0.0f;
    for (int v = 0; v < depth.height(); ++v)
        for (int u = 0; u < depth.width(); ++u)
            if (depth.valid(u, v)) {
                lo = std::min(lo, depth(u, v));
                hi = std::max(hi, depth(u, v));
            }
    const float span = hi > lo ? hi - lo : 1.0f;
    for (int v = 0; v < depth.height(); ++v) {
        for (int u = 0; u < depth.width(); ++u) {
            if (!depth.valid(u, v)) continue;
            const auto g = static_cast<std::uint8_t>(std::lround(235.0f - 180.0f * (depth(u, v) - lo) / span));
            img.set(u, v, {g, g, g});
        }
    }
    return img;
}

namespace {

void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, Rgb color) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.set(x0, y0, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void fill_disk(RgbImage& img, int cx, int cy, int r, Rgb color) {
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
            if (x * x + y * y <= r * r) img.set(cx + x, cy + y, color);
}

int round_px(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace

RgbImage render_overlay(const RgbImage& base, const Affordance2D& a) {
    constexpr Rgb kInlier{40, 220, 60};
    constexpr Rgb kOutlier{230, 40, 40};
    constexpr Rgb kContact{255, 210, 0};
    constexpr Rgb kArrow{0, 190, 255};

    RgbImage img = base;
    for (std::size_t i = 0; i < a.matched.size(); ++i) {
        const bool inlier = i < a.inliers.size() && a.inliers[i];
        const int u = round_px(a.matched[i].pixel.x());
        const int v = round_px(a.matched[i].pixel.y());
        for (int d = -2; d <= 2; ++d) {
            img.set(u + d, v - 2, inlier ? kInlier : kOutlier);
            img.set(u + d, v + 2, inlier ? kInlier : kOutlier);
            img.set(u - 2, v + d, inlier ? kInlier : kOutlier);
            img.set(u + 2, v + d, inlier ? kInlier : kOutlier);
        }
    }

    const double length = std::max(12.0, 0.25 * std::min(img.width, img.height));
    const Eigen::Vector2d& dir = a.direction.vector();
    const Eigen::Vector2d tip = a.contact + length * dir;
    const int cu = round_px(a.contact.x());
    const int cv = round_px(a.contact.y());
    draw_line(img, cu, cv, round_px(tip.x()), round_px(tip.y()), kArrow);
    for (const double side : {-1.0, 1.0}) {
        const double ang = side * 2.6;  // ~150 degrees from the shaft
        const Eigen::Vector2d barb = Eigen::Rotation2Dd(ang).toRotationMatrix() * dir;
        const Eigen::Vector2d end = tip + 0.3 * length * barb;
        draw_line(img, round_px(tip.x()), round_px(tip.y()), round_px(end.x()), round_px(end.y()), kArrow);
    }
    fill_disk(img, cu, cv, 3, kContact);
    return img;
}

}  // namespace ram
