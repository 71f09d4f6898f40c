#include "ram/transfer.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "ram/random.hpp"

namespace ram {

std::vector<MatchedWaypoint> transfer_waypoints(const Waypoints& waypoints, const DenseFeatureMap& source,
                                                const DenseFeatureMap& target, const PixelMask* targetMask) {
    if (!source.normalized || !target.normalized) {
        throw Error(ErrorCode::NotNormalized, "waypoint transfer needs normalized feature maps");
    }
    if (waypoints.size() < 2) throw Error(ErrorCode::InsufficientWaypoints, "transfer needs at least two waypoints");
    std::vector<MatchedWaypoint> out;
    out.reserve(waypoints.size());
    for (const auto& w : waypoints) {
        const Eigen::VectorXf f = sample_feature(source, w.x(), w.y());
        const FeatureMatch m = best_match(f, target, targetMask);
        out.push_back({m.pixel, m.score});
    }
    return out;
}

LineFit ransac_line(std::span<const Eigen::Vector2d> points, int iterations, double inlierTolerance, std::uint64_t seed) {
    const std::size_t n = points.size();
    if (n < 2) throw Error(ErrorCode::InsufficientPoints, "line fitting needs at least two points");
    const bool allSame = std::all_of(points.begin(), points.end(), [&](const Eigen::Vector2d& p) { return p == points[0]; });
    if (allSame) throw Error(ErrorCode::DegenerateLine, "all points coincide");

    Rng rng(seed);
    std::vector<bool> best;
    std::size_t bestCount = 0;
    std::vector<bool> consensus(n);
    for (int it = 0; it < iterations; ++it) {
        const std::size_t i = uniform_index(rng, n);
        std::size_t j = uniform_index(rng, n - 1);
        if (j >= i) ++j;
        const Eigen::Vector2d d = points[j] - points[i];
        const double len = d.norm();
        if (len < 1e-12) continue;
        const Eigen::Vector2d normal(-d.y() / len, d.x() / len);
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) {
            consensus[k] = std::abs(normal.dot(points[k] - points[i])) <= inlierTolerance;
            count += consensus[k] ? 1 : 0;
        }
        if (count > bestCount) {
            bestCount = count;
            best = consensus;
        }
    }
    if (bestCount < 2) throw Error(ErrorCode::DegenerateLine, "every sampled point pair was degenerate");

    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < n; ++k)
        if (best[k]) mean += points[k];
    mean /= static_cast<double>(bestCount);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        if (!best[k]) continue;
        const Eigen::Vector2d c = points[k] - mean;
        cov.noalias() += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
    Eigen::Vector2d axis = solver.eigenvectors().col(1);

    const auto first = static_cast<std::size_t>(std::find(best.begin(), best.end(), true) - best.begin());
    const auto last = n - 1 - static_cast<std::size_t>(std::find(best.rbegin(), best.rend(), true) - best.rbegin());
    if (axis.dot(points[last] - points[first]) < 0.0) axis = -axis;
    return {UnitVec2::normalize(axis), std::move(best)};
}

Affordance2D transfer_affordance(const Waypoints& waypoints, const DenseFeatureMap& source,
                                 const DenseFeatureMap& target, const PixelMask* targetMask,
                                 const TransferParams& params) {
    std::vector<MatchedWaypoint> matched = transfer_waypoints(waypoints, source, target, targetMask);
    double mean = 0.0;
    for (const auto& m : matched) mean += m.score;
    mean /= static_cast<double>(matched.size());
    if (mean < params.scoreFloor) {
        throw Error(ErrorCode::LowConfidenceTransfer, "mean correspondence score " + std::to_string(mean) +
                                                          " is below the floor " + std::to_string(params.scoreFloor));
    }

    std::vector<Eigen::Vector2d> pixels;
    pixels.reserve(matched.size());
    for (const auto& m : matched) pixels.push_back(m.pixel);
    LineFit fit = ransac_line(pixels, params.ransacIterations, params.inlierTolerance, params.seed);

    Affordance2D a{matched.front().pixel, fit.direction, std::move(matched), std::move(fit.inliers), mean};
    return a;
}

}  // namespace ram
