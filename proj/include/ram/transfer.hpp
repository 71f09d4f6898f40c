#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ram/features.hpp"
#include "ram/geometry.hpp"
#include "ram/memory.hpp"

namespace ram {

struct MatchedWaypoint {
    Eigen::Vector2d pixel;
    double score = 0.0;
};

/// 2D affordance in the target image: contact pixel and post-contact
/// direction. contact is always matched.front().pixel.
struct Affordance2D {
    Eigen::Vector2d contact;
    UnitVec2 direction = UnitVec2::normalize(Eigen::Vector2d::UnitX());
    std::vector<MatchedWaypoint> matched;
    std::vector<bool> inliers;
    double meanScore = 0.0;
};

struct TransferParams {
    int ransacIterations = 256;
    double inlierTolerance = 3.0;  ///< pixels
    double scoreFloor = 0.3;
    std::uint64_t seed = 0;
};

/// Samples the source feature at each waypoint and matches it into the
/// target (restricted to targetMask when given). Output order follows input.
std::vector<MatchedWaypoint> transfer_waypoints(const Waypoints& waypoints, const DenseFeatureMap& source,
                                                const DenseFeatureMap& target, const PixelMask* targetMask = nullptr);

struct LineFit {
    UnitVec2 direction;
    std::vector<bool> inliers;
};

/// Two-point RANSAC line fit followed by a principal-axis refit of the
/// largest consensus set. The direction points from the earliest inlier to
/// the latest one. Deterministic for a given seed.
LineFit ransac_line(std::span<const Eigen::Vector2d> points, int iterations, double inlierTolerance, std::uint64_t seed);

/// transfer_waypoints + ransac_line. The contact is the first transferred
/// waypoint whether or not RANSAC keeps it. Throws LowConfidenceTransfer when
/// the mean match score is below params.scoreFloor.
Affordance2D transfer_affordance(const Waypoints& waypoints, const DenseFeatureMap& source,
                                 const DenseFeatureMap& target, const PixelMask* targetMask,
                                 const TransferParams& params = {});

}  // namespace ram
