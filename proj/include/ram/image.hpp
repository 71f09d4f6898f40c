#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ram/geometry.hpp"
#include "ram/transfer.hpp"

namespace ram {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h, Rgb fill = {0, 0, 0});

    Rgb at(int u, int v) const;
    /// Silently ignores writes outside the image.
    void set(int u, int v, Rgb color);

    bool operator==(const RgbImage&) const = default;
};

/// Any PNG color type/bit depth, converted to 8-bit RGB. Throws IoError.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

/// Grayscale rendering of depth (near = bright); invalid pixels are black.
RgbImage render_depth(const DepthImage& depth);

/// Draws waypoint markers (inliers green, outliers red), the contact as a
/// filled dot and the post-contact direction as an arrow.
RgbImage render_overlay(const RgbImage& base, const Affordance2D& affordance);

}  // namespace ram
