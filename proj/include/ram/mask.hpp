#pragma once

#include <Eigen/Core>

namespace ram {

/// Binary pixel mask at image resolution. Rows are image rows (v), columns are
/// image columns (u).
struct PixelMask {
    using Array = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Array bits;

    PixelMask() = default;
    PixelMask(int height, int width, bool fill = false) : bits(Array::Constant(height, width, fill)) {}

    int width() const { return static_cast<int>(bits.cols()); }
    int height() const { return static_cast<int>(bits.rows()); }
    bool operator()(int u, int v) const { return bits(v, u); }
    bool& operator()(int u, int v) { return bits(v, u); }
    long count() const { return bits.count(); }

    /// Mask lookup at a continuous pixel position (pixel centers are integers);
    /// positions outside the image are never set.
    bool contains(double u, double v) const;

    bool operator==(const PixelMask& other) const {
        return bits.rows() == other.bits.rows() && bits.cols() == other.bits.cols() &&
               (bits == other.bits).all();
    }
};

}  // namespace ram
