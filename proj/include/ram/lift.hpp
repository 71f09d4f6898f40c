#pragma once

// Lifting a 2D affordance to 3D: back-project the contact, crop the local
// cloud, estimate and cluster surface normals, and keep the signed cluster
// normal whose image projection best agrees with the 2D direction.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ram/geometry.hpp"
#include "ram/transfer.hpp"

namespace ram {

struct LiftParams {
    double cropRadius = 0.10;  ///< meters
    int kNeighbors = 30;
    int kClusters = 4;
    double deltaProj = 0.05;  ///< meters
    int holeWindow = 11;      ///< pixels, full window width

    void validate() const;
};

struct NormalCluster {
    UnitVec3 center;
    int count = 0;
};

/// Lloyd's K-Means with k-means++ seeding on unit vectors. Inputs are sorted
/// lexicographically first, so the result does not depend on input order.
/// k is clamped to the number of distinct normals; empty clusters are
/// dropped; centers are re-normalized; clusters sorted by descending size.
std::vector<NormalCluster> cluster_normals(const Eigen::Matrix3Xd& normals, int k, std::uint64_t seed);

struct DirectionChoice {
    UnitVec3 direction;
    std::size_t cluster = 0;
    bool flipped = false;  ///< direction is the negated cluster center
    /// Best included angle per cluster over both signs; empty when both
    /// projections are degenerate.
    std::vector<std::optional<double>> angles;
};

/// Evaluates +n and -n for every cluster center, projects each through
/// project_direction and returns the one with the least included angle to
/// the 2D direction. Ties prefer larger clusters, then list order. Throws
/// AmbiguousDirection if every projection is degenerate.
DirectionChoice select_direction(std::span<const NormalCluster> clusters, const UnitVec2& direction2d,
                                 const Eigen::Vector3d& contact, const CameraIntrinsics& K, double delta);

struct ClusterDiagnostic {
    UnitVec3 center;
    int count = 0;
    std::optional<double> angle;  ///< radians
};

struct Affordance3D {
    Eigen::Vector3d contact;
    UnitVec3 direction = UnitVec3::normalize(Eigen::Vector3d::UnitZ());
    std::vector<ClusterDiagnostic> clusters;
    Eigen::Vector2i contactPixel{0, 0};  ///< pixel that supplied the contact depth
    bool contactSubstituted = false;
    int cropSize = 0;
};

BackProjection lift_contact(const Affordance2D& a2d, const DepthImage& depth, const CameraIntrinsics& K,
                            const LiftParams& params = {});

/// Full chain from a 2D affordance to contact point and motion direction.
/// Stage errors are rethrown tagged with "lift:<stage>".
Affordance3D lift_affordance(const Affordance2D& a2d, const DepthImage& depth, const CameraIntrinsics& K,
                             const LiftParams& params = {}, std::uint64_t seed = 0);

struct GraspCandidate {
    Eigen::Vector3d position;
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    double score = 0.0;
};

struct GraspChoice {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Candidate nearest to the contact point; ties prefer the higher score,
/// then list order. Throws NoGraspCandidates.
GraspChoice select_grasp(std::span<const GraspCandidate> candidates, const Eigen::Vector3d& contact);

}  // namespace ram
