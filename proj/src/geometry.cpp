#include "ram/geometry.hpp"

#include <algorithm>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

namespace ram {

bool PixelMask::contains(double u, double v) const {
    const double ru = std::floor(u + 0.5);
    const double rv = std::floor(v + 0.5);
    if (ru < 0 || rv < 0 || ru >= width() || rv >= height()) return false;
    return bits(static_cast<Eigen::Index>(rv), static_cast<Eigen::Index>(ru));
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw Error(ErrorCode::InvalidArgument, "principal point lies outside the image");
    }
}

BackProjection back_project(double u, double v, const DepthImage& depth, const CameraIntrinsics& K,
                            int holeRadius) {
    if (!in_image(u, v, depth.width(), depth.height())) {
        throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                                ") is outside the depth image");
    }
    const int pu = static_cast<int>(std::floor(u + 0.5));
    const int pv = static_cast<int>(std::floor(v + 0.5));
    if (depth.valid(pu, pv)) {
        return {unproject(u, v, static_cast<double>(depth(pu, pv)), K), {pu, pv}, false};
    }

    // Row-major scan with strict improvement keeps the first pixel among ties.
    int best = std::numeric_limits<int>::max();
    Eigen::Vector2i found(-1, -1);
    for (int y = std::max(0, pv - holeRadius); y <= std::min(depth.height() - 1, pv + holeRadius); ++y) {
        for (int x = std::max(0, pu - holeRadius); x <= std::min(depth.width() - 1, pu + holeRadius); ++x) {
            if (!depth.valid(x, y)) continue;
            const int d2 = (x - pu) * (x - pu) + (y - pv) * (y - pv);
            if (d2 < best) {
                best = d2;
                found = {x, y};
            }
        }
    }
    if (found.x() < 0) {
        throw Error(ErrorCode::NoValidDepth, "no valid depth within " + std::to_string(holeRadius) +
                                                 " px of (" + std::to_string(pu) + ", " + std::to_string(pv) + ")");
    }
    const double z = depth(found.x(), found.y());
    return {unproject(double(found.x()), double(found.y()), z, K), found, true};
}

UnitVec2 project_direction(const Eigen::Vector3d& origin, const UnitVec3& dir, const CameraIntrinsics& K,
                           double delta) {
    const Eigen::Vector2d a = project(origin, K);
    const Eigen::Vector2d b = project(Eigen::Vector3d(origin + delta * dir.vector()), K);
    const Eigen::Vector2d d = b - a;
    if (d.norm() < 1e-9) {
        throw Error(ErrorCode::DegenerateProjection, "direction projects to a point (parallel to the viewing ray)");
    }
    return UnitVec2::normalize(d);
}

namespace {

PointCloud cloud_from(const DepthImage& depth, const CameraIntrinsics& K, const PixelMask* mask) {
    if (depth.width() != K.width || depth.height() != K.height) {
        throw Error(ErrorCode::DimensionMismatch, "depth image and intrinsics disagree on image size");
    }
    if (mask && (mask->width() != depth.width() || mask->height() != depth.height())) {
        throw Error(ErrorCode::DimensionMismatch, "mask and depth image disagree on image size");
    }
    std::vector<int> pixels;
    pixels.reserve(static_cast<std::size_t>(depth.values.size()));
    for (int v = 0; v < depth.height(); ++v) {
        for (int u = 0; u < depth.width(); ++u) {
            if (depth.valid(u, v) && (!mask || (*mask)(u, v))) pixels.push_back(v * depth.width() + u);
        }
    }
    if (pixels.empty()) throw Error(ErrorCode::EmptyCloud, "depth image has no valid pixels");

    PointCloud cloud;
    cloud.points.resize(3, static_cast<Eigen::Index>(pixels.size()));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const int u = pixels[i] % depth.width();
        const int v = pixels[i] / depth.width();
        cloud.points.col(static_cast<Eigen::Index>(i)) = unproject(double(u), double(v), double(depth(u, v)), K);
    }
    cloud.pixels = std::move(pixels);
    return cloud;
}

}  // namespace

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K) { return cloud_from(depth, K, nullptr); }

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K, const PixelMask& mask) {
    return cloud_from(depth, K, &mask);
}

PointCloud crop_cloud(const PointCloud& cloud, const Eigen::Vector3d& center, double radius) {
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "crop radius must be positive");
    const double r2 = radius * radius;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        if ((cloud.points.col(i) - center).squaredNorm() <= r2) keep.push_back(i);
    }
    if (keep.empty()) throw Error(ErrorCode::EmptyCrop, "no point within the crop radius");

    PointCloud out;
    out.points.resize(3, static_cast<Eigen::Index>(keep.size()));
    const bool tracked = !cloud.pixels.empty();
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.points.col(static_cast<Eigen::Index>(j)) = cloud.points.col(keep[j]);
        if (tracked) out.pixels.push_back(cloud.pixels[static_cast<std::size_t>(keep[j])]);
    }
    return out;
}

Eigen::Matrix3Xd estimate_normals(const PointCloud& cloud, int k, const Eigen::Vector3d& viewOrigin) {
    if (k < 3) throw Error(ErrorCode::InvalidArgument, "normal estimation needs k >= 3");
    const Eigen::Index n = cloud.size();
    if (n < k + 1) {
        throw Error(ErrorCode::InsufficientNeighbors,
                    "cloud has " + std::to_string(n) + " points, need at least " + std::to_string(k + 1));
    }

    Eigen::Matrix3Xd normals(3, n);
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d p = cloud.points.col(i);
        for (Eigen::Index j = 0; j < n; ++j) dist[static_cast<std::size_t>(j)] = {(cloud.points.col(j) - p).squaredNorm(), j};
        // (distance, index) ordering makes neighbor sets independent of the sort implementation.
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());

        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int m = 0; m < k; ++m) mean += cloud.points.col(dist[static_cast<std::size_t>(m)].second);
        mean /= k;
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int m = 0; m < k; ++m) {
            const Eigen::Vector3d d = cloud.points.col(dist[static_cast<std::size_t>(m)].second) - mean;
            cov.noalias() += d * d.transpose();
        }

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
        const Eigen::Vector3d& lambda = solver.eigenvalues();  // ascending
        if (!(lambda(2) > 0.0) || lambda(1) <= 1e-12 * lambda(2)) {
            throw Error(ErrorCode::DegenerateNeighborhood,
                        "neighborhood of point " + std::to_string(i) + " is collinear or coincident");
        }
        Eigen::Vector3d normal = solver.eigenvectors().col(0).normalized();
        if (normal.dot(viewOrigin - p) < 0.0) normal = -normal;
        normals.col(i) = normal;
    }
    return normals;
}

}  // namespace ram
