#pragma once

// Dense feature maps and flat embeddings produced by external vision models.
// The core never runs a network; it only loads, normalizes, samples and
// matches these arrays.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ram/error.hpp"
#include "ram/mask.hpp"

namespace ram {

/// H x W grid of C-dimensional descriptors covering an image of
/// imageHeight x imageWidth pixels. Row i of data is grid cell i in row-major
/// order (channel-fastest storage, matching the on-disk layout).
struct DenseFeatureMap {
    using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    int gridHeight = 0;
    int gridWidth = 0;
    int imageHeight = 0;
    int imageWidth = 0;
    bool normalized = false;
    Matrix data;

    DenseFeatureMap() = default;
    DenseFeatureMap(int gridH, int gridW, int channels, int imageH, int imageW)
        : gridHeight(gridH), gridWidth(gridW), imageHeight(imageH), imageWidth(imageW),
          data(Matrix::Zero(static_cast<Eigen::Index>(gridH) * gridW, channels)) {}

    int channels() const { return static_cast<int>(data.cols()); }
    int cells() const { return gridHeight * gridWidth; }
    double scale_x() const { return static_cast<double>(imageWidth) / gridWidth; }
    double scale_y() const { return static_cast<double>(imageHeight) / gridHeight; }

    auto cell(int row, int col) { return data.row(static_cast<Eigen::Index>(row) * gridWidth + col); }
    auto cell(int row, int col) const { return data.row(static_cast<Eigen::Index>(row) * gridWidth + col); }

    /// Image-pixel coordinates of a cell center.
    Eigen::Vector2d cell_center(int index) const {
        return {(index % gridWidth + 0.5) * scale_x() - 0.5, (index / gridWidth + 0.5) * scale_y() - 0.5};
    }
    /// Continuous grid coordinates (x, y) of an image pixel; cell centers map to integers.
    Eigen::Vector2d to_grid(double u, double v) const {
        return {(u + 0.5) / scale_x() - 0.5, (v + 0.5) / scale_y() - 0.5};
    }

    /// Throws DimensionMismatch on inconsistent sizes, NotNormalized when the
    /// normalized flag is set but a nonzero cell is not unit length.
    void validate() const;

    bool operator==(const DenseFeatureMap& o) const {
        return gridHeight == o.gridHeight && gridWidth == o.gridWidth && imageHeight == o.imageHeight &&
               imageWidth == o.imageWidth && normalized == o.normalized && data.rows() == o.data.rows() &&
               data.cols() == o.data.cols() && data == o.data;
    }
};

enum class EmbeddingKind : unsigned char { Image = 0, Text = 1 };

struct Embedding {
    EmbeddingKind kind = EmbeddingKind::Image;
    Eigen::VectorXf values;

    bool operator==(const Embedding& o) const {
        return kind == o.kind && values.size() == o.values.size() && values == o.values;
    }
};

/// Cosine similarity accumulated in double. Throws ZeroVector or
/// DimensionMismatch.
template <typename A, typename B>
double cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of vectors with different sizes");
    const auto ad = a.template cast<double>();
    const auto bd = b.template cast<double>();
    const double na = ad.norm();
    const double nb = bd.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine with a zero vector");
    return ad.dot(bd) / (na * nb);
}

inline double cosine(const Embedding& a, const Embedding& b) { return cosine(a.values, b.values); }

/// Divides every cell by its L2 norm. Zero cells are left as zeros.
DenseFeatureMap normalize_features(const DenseFeatureMap& map);

/// Number of all-zero cells (padding); these never take part in matching.
int count_zero_cells(const DenseFeatureMap& map);

/// Bilinear lookup at an image pixel with border clamping; the result is
/// re-normalized when the map is normalized. Throws OutOfBounds.
Eigen::VectorXf sample_feature(const DenseFeatureMap& map, double u, double v);

/// Indices of cells whose centers fall inside the mask (all cells without a
/// mask). Throws DimensionMismatch when the mask is not at image resolution.
std::vector<int> mask_cells(const DenseFeatureMap& map, const PixelMask* mask);

struct FeatureMatch {
    Eigen::Vector2d pixel;  ///< matched cell center, image pixels
    int cell = -1;
    double score = 0.0;  ///< cosine similarity
};

/// Cell maximizing cosine similarity with the query, restricted to cells
/// whose center lies in the mask. Zero cells are never returned; ties go to
/// the smallest row-major index. Throws EmptyMask, NotNormalized, ZeroVector.
FeatureMatch best_match(const Eigen::Ref<const Eigen::VectorXf>& query, const DenseFeatureMap& target,
                        const PixelMask* mask = nullptr);

}  // namespace ram
