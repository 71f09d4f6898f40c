#include "ram/lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ram/random.hpp"

namespace ram {

void LiftParams::validate() const {
    if (!(cropRadius > 0.0) || kNeighbors < 3 || kClusters < 1 || !(deltaProj > 0.0) || holeWindow < 1) {
        throw Error(ErrorCode::InvalidArgument, "lift parameters must be positive (kNeighbors >= 3)");
    }
}

std::vector<NormalCluster> cluster_normals(const Eigen::Matrix3Xd& normals, int k, std::uint64_t seed) {
    if (normals.cols() == 0) throw Error(ErrorCode::InvalidArgument, "no normals to cluster");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "cluster count must be positive");

    std::vector<Eigen::Vector3d> pts(static_cast<std::size_t>(normals.cols()));
    for (Eigen::Index i = 0; i < normals.cols(); ++i) pts[static_cast<std::size_t>(i)] = normals.col(i);
    const auto lex = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    };
    std::sort(pts.begin(), pts.end(), lex);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < pts.size(); ++i) distinct += pts[i] != pts[i - 1] ? 1 : 0;
    const std::size_t n = pts.size();
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), distinct);

    // k-means++ seeding
    Rng rng(seed);
    std::vector<Eigen::Vector3d> centers{pts[uniform_index(rng, n)]};
    std::vector<double> d2(n);
    while (centers.size() < kk) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, (pts[i] - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        const double r = uniform01(rng) * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] == 0.0) continue;
            acc += d2[i];
            pick = i;
            if (acc > r) break;
        }
        centers.push_back(pts[pick]);
    }

    std::vector<std::size_t> assign(n, kk);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bestD = (pts[i] - centers[0]).squaredNorm();
            for (std::size_t c = 1; c < kk; ++c) {
                const double d = (pts[i] - centers[c]).squaredNorm();
                if (d < bestD) {
                    bestD = d;
                    best = c;
                }
            }
            changed |= assign[i] != best;
            assign[i] = best;
        }
        if (!changed) break;
        std::vector<Eigen::Vector3d> sum(kk, Eigen::Vector3d::Zero());
        std::vector<int> count(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[assign[i]] += pts[i];
            ++count[assign[i]];
        }
        for (std::size_t c = 0; c < kk; ++c)
            if (count[c] > 0) centers[c] = sum[c] / count[c];
    }

    std::vector<int> count(kk, 0);
    std::vector<Eigen::Vector3d> sum(kk, Eigen::Vector3d::Zero());
    std::vector<std::size_t> firstMember(kk, n);
    for (std::size_t i = 0; i < n; ++i) {
        ++count[assign[i]];
        sum[assign[i]] += pts[i];
        firstMember[assign[i]] = std::min(firstMember[assign[i]], i);
    }
    std::vector<NormalCluster> out;
    for (std::size_t c = 0; c < kk; ++c) {
        if (count[c] == 0) continue;
        // Antipodal members can cancel out; fall back to a member direction.
        const Eigen::Vector3d mean = sum[c] / count[c];
        const Eigen::Vector3d dir = mean.norm() > 1e-12 ? mean : pts[firstMember[c]];
        out.push_back({UnitVec3::normalize(dir), count[c]});
    }
    std::stable_sort(out.begin(), out.end(), [](const NormalCluster& a, const NormalCluster& b) { return a.count > b.count; });
    return out;
}

DirectionChoice select_direction(std::span<const NormalCluster> clusters, const UnitVec2& direction2d,
                                 const Eigen::Vector3d& contact, const CameraIntrinsics& K, double delta) {
    if (clusters.empty()) throw Error(ErrorCode::InvalidArgument, "no cluster centers to choose from");
    if (!(contact.z() > 0.0)) throw Error(ErrorCode::BehindCamera, "contact point is not in front of the camera");

    std::optional<DirectionChoice> best;
    double bestAngle = std::numeric_limits<double>::infinity();
    std::vector<std::optional<double>> angles(clusters.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        for (const bool flip : {false, true}) {
            const UnitVec3 dir = flip ? -clusters[i].center : clusters[i].center;
            double angle;
            try {
                angle = included_angle(project_direction(contact, dir, K, delta), direction2d);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::DegenerateProjection || e.code() == ErrorCode::BehindCamera) continue;
                throw;
            }
            if (!angles[i] || angle < *angles[i]) angles[i] = angle;
            const bool better = angle < bestAngle - 1e-12 ||
                                (std::abs(angle - bestAngle) <= 1e-12 && best &&
                                 clusters[i].count > clusters[best->cluster].count);
            if (!best || better) {
                bestAngle = angle;
                best = DirectionChoice{dir, i, flip, {}};
            }
        }
    }
    if (!best) throw Error(ErrorCode::AmbiguousDirection, "every cluster normal projects degenerately into the image");
    best->angles = std::move(angles);
    return *best;
}

BackProjection lift_contact(const Affordance2D& a2d, const DepthImage& depth, const CameraIntrinsics& K,
                            const LiftParams& params) {
    return back_project(a2d.contact.x(), a2d.contact.y(), depth, K, params.holeWindow / 2);
}

namespace {

template <typename F>
auto lift_stage(const char* stage, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw e.with_stage(std::string("lift:") + stage);
    }
}

}  // namespace

Affordance3D lift_affordance(const Affordance2D& a2d, const DepthImage& depth, const CameraIntrinsics& K,
                             const LiftParams& params, std::uint64_t seed) {
    params.validate();
    const BackProjection bp = lift_stage("contact", [&] { return lift_contact(a2d, depth, K, params); });
    const PointCloud cloud = lift_stage("cloud", [&] { return depth_to_cloud(depth, K); });
    const PointCloud local = lift_stage("crop", [&] { return crop_cloud(cloud, bp.point, params.cropRadius); });
    const Eigen::Matrix3Xd normals = lift_stage("normals", [&] { return estimate_normals(local, params.kNeighbors); });
    const std::vector<NormalCluster> clusters =
        lift_stage("cluster", [&] { return cluster_normals(normals, params.kClusters, seed); });
    const DirectionChoice choice =
        lift_stage("direction", [&] { return select_direction(clusters, a2d.direction, bp.point, K, params.deltaProj); });

    Affordance3D out;
    out.contact = bp.point;
    out.direction = choice.direction;
    out.contactPixel = bp.pixel;
    out.contactSubstituted = bp.substituted;
    out.cropSize = static_cast<int>(local.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        out.clusters.push_back({clusters[i].center, clusters[i].count, choice.angles[i]});
    }
    return out;
}

GraspChoice select_grasp(std::span<const GraspCandidate> candidates, const Eigen::Vector3d& contact) {
    if (candidates.empty()) throw Error(ErrorCode::NoGraspCandidates, "no grasp candidates supplied");
    GraspChoice best{0, (candidates[0].position - contact).norm()};
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double d = (candidates[i].position - contact).norm();
        if (d < best.distance || (d == best.distance && candidates[i].score > candidates[best.index].score)) {
            best = {i, d};
        }
    }
    return best;
}

}  // namespace ram
