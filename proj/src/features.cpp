#include "ram/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ram/geometry.hpp"

namespace ram {

void DenseFeatureMap::validate() const {
    if (gridHeight <= 0 || gridWidth <= 0 || channels() <= 0) {
        throw Error(ErrorCode::DimensionMismatch, "feature map has an empty grid or no channels");
    }
    if (data.rows() != static_cast<Eigen::Index>(gridHeight) * gridWidth) {
        throw Error(ErrorCode::DimensionMismatch, "feature map data does not match its grid size");
    }
    if (imageHeight <= 0 || imageWidth <= 0) {
        throw Error(ErrorCode::DimensionMismatch, "feature map has no image size");
    }
    if (!data.allFinite()) throw Error(ErrorCode::InvalidArgument, "feature map contains non-finite values");
    if (normalized) {
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double n = data.row(i).cast<double>().norm();
            if (n != 0.0 && std::abs(n - 1.0) > 1e-6) {
                throw Error(ErrorCode::NotNormalized, "cell " + std::to_string(i) + " of a normalized map has norm " +
                                                          std::to_string(n));
            }
        }
    }
}

DenseFeatureMap normalize_features(const DenseFeatureMap& map) {
    DenseFeatureMap out = map;
    for (Eigen::Index i = 0; i < out.data.rows(); ++i) {
        const double n = out.data.row(i).cast<double>().norm();
        if (n > 0.0) out.data.row(i) = (out.data.row(i).cast<double>() / n).cast<float>();
    }
    out.normalized = true;
    return out;
}

int count_zero_cells(const DenseFeatureMap& map) {
    int zeros = 0;
    for (Eigen::Index i = 0; i < map.data.rows(); ++i) zeros += map.data.row(i).isZero(0.0) ? 1 : 0;
    return zeros;
}

Eigen::VectorXf sample_feature(const DenseFeatureMap& map, double u, double v) {
    if (!in_image(u, v, map.imageWidth, map.imageHeight)) {
        throw Error(ErrorCode::OutOfBounds,
                    "sample at (" + std::to_string(u) + ", " + std::to_string(v) + ") is outside the image");
    }
    const Eigen::Vector2d g = map.to_grid(u, v);
    const double gx = std::clamp(g.x(), 0.0, map.gridWidth - 1.0);
    const double gy = std::clamp(g.y(), 0.0, map.gridHeight - 1.0);
    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    const int x1 = std::min(x0 + 1, map.gridWidth - 1);
    const int y1 = std::min(y0 + 1, map.gridHeight - 1);
    const double tx = gx - x0;
    const double ty = gy - y0;

    Eigen::VectorXd f = (1 - tx) * (1 - ty) * map.cell(y0, x0).transpose().cast<double>() +
                        tx * (1 - ty) * map.cell(y0, x1).transpose().cast<double>() +
                        (1 - tx) * ty * map.cell(y1, x0).transpose().cast<double>() +
                        tx * ty * map.cell(y1, x1).transpose().cast<double>();
    if (map.normalized) {
        const double n = f.norm();
        if (n > 0.0) f /= n;
    }
    return f.cast<float>();
}

std::vector<int> mask_cells(const DenseFeatureMap& map, const PixelMask* mask) {
    std::vector<int> cells;
    cells.reserve(static_cast<std::size_t>(map.cells()));
    if (mask && (mask->width() != map.imageWidth || mask->height() != map.imageHeight)) {
        throw Error(ErrorCode::DimensionMismatch, "mask size does not match the feature map's image size");
    }
    for (int i = 0; i < map.cells(); ++i) {
        if (!mask) {
            cells.push_back(i);
            continue;
        }
        const Eigen::Vector2d c = map.cell_center(i);
        if (mask->contains(c.x(), c.y())) cells.push_back(i);
    }
    return cells;
}

FeatureMatch best_match(const Eigen::Ref<const Eigen::VectorXf>& query, const DenseFeatureMap& target,
                        const PixelMask* mask) {
    if (!target.normalized) throw Error(ErrorCode::NotNormalized, "best_match needs a normalized target map");
    if (query.size() != target.channels()) {
        throw Error(ErrorCode::DimensionMismatch, "query and target map have different channel counts");
    }
    const Eigen::VectorXd q = query.cast<double>();
    const double qn = q.norm();
    if (!(qn > 0.0)) throw Error(ErrorCode::ZeroVector, "best_match query is a zero vector");

    const std::vector<int> cells = mask_cells(target, mask);
    FeatureMatch best;
    double bestScore = -std::numeric_limits<double>::infinity();
    for (const int i : cells) {
        const auto row = target.data.row(i).cast<double>();
        const double n = row.norm();
        if (n == 0.0) continue;
        const double s = row.dot(q) / (n * qn);
        if (s > bestScore) {
            bestScore = s;
            best.cell = i;
        }
    }
    if (best.cell < 0) throw Error(ErrorCode::EmptyMask, "no nonzero target cell inside the mask");
    best.score = bestScore;
    best.pixel = target.cell_center(best.cell);
    return best;
}

}  // namespace ram
