#pragma once

// Pinhole camera model, depth/point-cloud conversion and local surface normals.
//
// Pixel convention: integer coordinates address pixel centers, (0,0) is the
// top-left pixel, u grows rightward and v downward. Camera frame has +z
// pointing away from the camera.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ram/error.hpp"
#include "ram/mask.hpp"

namespace ram {

/// Vector constrained to unit Euclidean norm. Only constructible through
/// normalize(), so holding one is proof of the invariant.
template <typename Scalar, int Dim>
class UnitVector {
public:
    using Vector = Eigen::Matrix<Scalar, Dim, 1>;

    template <typename Derived>
    static UnitVector normalize(const Eigen::MatrixBase<Derived>& v) {
        const Scalar n = v.norm();
        if (!(n > Scalar(0)) || !std::isfinite(n)) {
            throw Error(ErrorCode::ZeroVector, "cannot normalize a zero or non-finite vector");
        }
        return UnitVector(Vector(v / n));
    }

    const Vector& vector() const { return v_; }
    operator const Vector&() const { return v_; }
    Scalar operator[](Eigen::Index i) const { return v_[i]; }
    Scalar dot(const UnitVector& other) const { return v_.dot(other.v_); }
    UnitVector operator-() const { return UnitVector(Vector(-v_)); }
    bool operator==(const UnitVector& other) const { return v_ == other.v_; }

private:
    explicit UnitVector(Vector v) : v_(std::move(v)) {}
    Vector v_;
};

using UnitVec2 = UnitVector<double, 2>;
using UnitVec3 = UnitVector<double, 3>;

/// Angle between two unit vectors in radians, robust near 0 and pi.
template <typename Scalar, int Dim>
Scalar included_angle(const UnitVector<Scalar, Dim>& a, const UnitVector<Scalar, Dim>& b) {
    return std::atan2((a.vector() - b.vector()).norm(), (a.vector() + b.vector()).norm()) * Scalar(2);
}

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies
    /// inside the image.
    void validate() const;

    bool operator==(const CameraIntrinsics&) const = default;
};

/// Per-pixel metric depth, row-major. A pixel is invalid iff its value is
/// non-finite or <= 0.
struct DepthImage {
    using Array = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Array values;

    DepthImage() = default;
    DepthImage(int height, int width, float fill = 0.0f) : values(Array::Constant(height, width, fill)) {}

    int width() const { return static_cast<int>(values.cols()); }
    int height() const { return static_cast<int>(values.rows()); }
    float operator()(int u, int v) const { return values(v, u); }
    float& operator()(int u, int v) { return values(v, u); }
    bool valid(int u, int v) const {
        const float z = values(v, u);
        return std::isfinite(z) && z > 0.0f;
    }
};

struct PointCloud {
    Eigen::Matrix3Xd points;
    /// Row-major source pixel index per point; empty when not tracked.
    std::vector<int> pixels;

    Eigen::Index size() const { return points.cols(); }
};

/// True when (u, v) addresses a location covered by a width x height image,
/// i.e. 0 <= u <= width-1 and 0 <= v <= height-1.
inline bool in_image(double u, double v, int width, int height) {
    return u >= 0.0 && v >= 0.0 && u <= width - 1.0 && v <= height - 1.0;
}

/// Pinhole projection. Throws BehindCamera for z <= 0. The result may lie
/// outside the image.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 1> project(const Eigen::MatrixBase<Derived>& p,
                                                      const CameraIntrinsics& K) {
    EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
    using Scalar = typename Derived::Scalar;
    if (!(p.z() > Scalar(0))) throw Error(ErrorCode::BehindCamera, "point is not in front of the camera");
    return {Scalar(K.fx) * p.x() / p.z() + Scalar(K.cx), Scalar(K.fy) * p.y() / p.z() + Scalar(K.cy)};
}

/// Inverse pinhole for a known depth z.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> unproject(Scalar u, Scalar v, Scalar z, const CameraIntrinsics& K) {
    return {(u - Scalar(K.cx)) * z / Scalar(K.fx), (v - Scalar(K.cy)) * z / Scalar(K.fy), z};
}

struct BackProjection {
    Eigen::Vector3d point;
    /// Pixel whose depth was used.
    Eigen::Vector2i pixel;
    /// True when the requested pixel was a hole and a neighbor supplied depth.
    bool substituted = false;
};

/// Back-projects (u, v) using the depth at the nearest valid pixel within a
/// (2*holeRadius+1)^2 window around the rounded location (ties by row-major
/// order). When the rounded pixel itself is valid the exact (u, v) is used;
/// otherwise the substitute pixel's center is back-projected.
BackProjection back_project(double u, double v, const DepthImage& depth, const CameraIntrinsics& K,
                            int holeRadius = 5);

/// Image-space direction of a small 3D displacement delta*dir from origin.
/// Throws DegenerateProjection when the displacement is below 1e-9 px.
UnitVec2 project_direction(const Eigen::Vector3d& origin, const UnitVec3& dir, const CameraIntrinsics& K,
                           double delta = 0.05);

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K);
PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K, const PixelMask& mask);

/// Points within a closed ball, order preserved. Throws EmptyCrop.
PointCloud crop_cloud(const PointCloud& cloud, const Eigen::Vector3d& center, double radius);

/// PCA normals over the k nearest neighbors of each point (the point itself
/// included), oriented toward viewOrigin. Columns of the result are unit
/// normals in cloud order.
Eigen::Matrix3Xd estimate_normals(const PointCloud& cloud, int k,
                                  const Eigen::Vector3d& viewOrigin = Eigen::Vector3d::Zero());

}  // namespace ram
