#pragma once

// Deterministic synthetic scenes and feature maps with analytic ground truth.
// Used as test oracles and to build inspectable fixtures from the CLI.

#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ram/features.hpp"
#include "ram/geometry.hpp"
#include "ram/mask.hpp"

namespace ram {

struct SyntheticScene {
    DepthImage depth;
    CameraIntrinsics intrinsics;
    /// Analytic unit normal per pixel (row-major columns); zero where the ray
    /// hits nothing.
    Eigen::Matrix3Xd normals;
    std::map<std::string, PixelMask> faceMasks;
    std::map<std::string, Eigen::Vector3d> points;
    std::map<std::string, Eigen::Vector3d> directions;

    Eigen::Vector3d normal_at(int u, int v) const { return normals.col(static_cast<Eigen::Index>(v) * depth.width() + u); }
};

/// Plane {p : n.p + distance = 0} with n facing the camera, so a plane with
/// normal (0,0,-1) at distance 2 sits at z = 2. Gaussian depth noise of
/// standard deviation `noise` is added per pixel. Throws PlaneNotVisible when
/// any pixel ray misses the plane's front side.
SyntheticScene make_plane_scene(const Eigen::Vector3d& normal, double distance, const CameraIntrinsics& K,
                                double noise = 0.0, std::uint64_t seed = 0);

/// Axis-aligned box in its own frame, centered at the origin, seen through
/// cameraFromBox. Faces are named "+x", "-x", "+y", "-y", "+z", "-z". The
/// handle lies on handleFace at handleOffset (in units of the face's half
/// extents along its two in-plane axes, cyclic order after the face axis).
struct BoxSpec {
    Eigen::Vector3d halfExtents{0.20, 0.15, 0.10};
    Eigen::Isometry3d cameraFromBox = Eigen::Isometry3d::Identity();
    std::string handleFace = "+z";
    Eigen::Vector2d handleOffset = Eigen::Vector2d::Zero();
    double noise = 0.0;
};

/// Ray-cast depth of the box. groundTruth points["handle"] and
/// directions["handle"] hold the handle point and its face's outward normal
/// (camera frame); faceMasks hold the visible pixels of each face. Throws
/// DegenerateGeometry for non-positive extents and PlaneNotVisible when the
/// handle is hidden or off-image.
SyntheticScene make_box_scene(const BoxSpec& spec, const CameraIntrinsics& K, std::uint64_t seed = 0);

/// Camera looking at a point from the given position; camera y points down
/// relative to `up`.
Eigen::Isometry3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up);

/// A seeded camera pose in front of the "+z" face (drawer front) with the
/// handle placed off-center on that face.
BoxSpec drawer_front_spec(std::uint64_t seed, double noise = 0.0);

/// A seeded camera pose viewing the vertical edge between "+z" and "+x", with
/// the handle on that edge.
BoxSpec box_corner_spec(std::uint64_t seed, double noise = 0.0);

struct AffineWarp {
    Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return linear * p + translation; }
    /// Throws NonInvertibleWarp.
    AffineWarp inverse() const;

    static AffineWarp translate(double dx, double dy) { return {Eigen::Matrix2d::Identity(), {dx, dy}}; }
    /// Rotation by `angle` and isotropic scale about a center point.
    static AffineWarp similarity(double angle, double scale, const Eigen::Vector2d& center);
};

struct FeaturePair {
    DenseFeatureMap source;
    DenseFeatureMap target;
};

/// Normalized positional codes built from low-frequency sinusoids of the
/// grid coordinates, with seeded phases. Target cell x' holds the source
/// code of warp^-1(x'), so cosine nearest-neighbor matching recovers the warp
/// exactly where warp^-1 lands on a grid point. Channels beyond a multiple of
/// four are zero. The warp acts on grid coordinates. Image size defaults to
/// the grid size.
FeaturePair make_coordinate_features(int gridH, int gridW, int channels, const AffineWarp& warp, std::uint64_t seed,
                                     int imageH = 0, int imageW = 0);

/// The positional code of one (possibly off-grid) position, as used by
/// make_coordinate_features.
Eigen::VectorXf coordinate_code(const Eigen::Vector2d& gridPos, int gridH, int gridW, int channels, std::uint64_t seed);

/// Seeded random unit-norm embedding.
Embedding random_embedding(int dim, EmbeddingKind kind, std::uint64_t seed);

/// Unit-norm embedding at cosine similarity `similarity` to `base`.
Embedding embedding_near(const Embedding& base, double similarity, std::uint64_t seed);

}  // namespace ram
