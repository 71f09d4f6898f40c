#include "ram/synth.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "ram/random.hpp"

namespace ram {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector3d pixel_ray(int u, int v, const CameraIntrinsics& K) {
    return {(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
}

void add_noise(SyntheticScene& scene, double noise, std::uint64_t seed) {
    if (noise <= 0.0) return;
    Rng rng(seed);
    for (int v = 0; v < scene.depth.height(); ++v) {
        for (int u = 0; u < scene.depth.width(); ++u) {
            if (!scene.depth.valid(u, v)) continue;
            scene.depth(u, v) = static_cast<float>(scene.depth(u, v) + noise * standard_normal(rng));
        }
    }
}

struct BoxHit {
    double t = 0.0;  ///< ray parameter; equals camera z for pixel rays
    int axis = -1;
    int sign = 0;
};

std::optional<BoxHit> cast_box(const Eigen::Vector3d& rayCam, const BoxSpec& spec, const Eigen::Isometry3d& boxFromCamera) {
    const Eigen::Vector3d o = boxFromCamera.translation();
    const Eigen::Vector3d d = boxFromCamera.linear() * rayCam;
    double tNear = -std::numeric_limits<double>::infinity();
    double tFar = std::numeric_limits<double>::infinity();
    BoxHit hit;
    for (int a = 0; a < 3; ++a) {
        const double h = spec.halfExtents[a];
        if (std::abs(d[a]) < 1e-15) {
            if (std::abs(o[a]) > h) return std::nullopt;
            continue;
        }
        const double t1 = (-h - o[a]) / d[a];
        const double t2 = (h - o[a]) / d[a];
        const double lo = std::min(t1, t2);
        const double hi = std::max(t1, t2);
        if (lo > tNear) {
            tNear = lo;
            hit.axis = a;
            hit.sign = d[a] > 0 ? -1 : 1;
        }
        tFar = std::min(tFar, hi);
    }
    if (hit.axis < 0 || tNear > tFar || !(tNear > 0.0)) return std::nullopt;
    hit.t = tNear;
    return hit;
}

std::string face_name(int axis, int sign) { return std::string(sign > 0 ? "+" : "-") + "xyz"[axis]; }

}  // namespace

SyntheticScene make_plane_scene(const Eigen::Vector3d& normal, double distance, const CameraIntrinsics& K, double noise,
                                std::uint64_t seed) {
    K.validate();
    const UnitVec3 n = UnitVec3::normalize(normal);
    if (!(distance > 0.0)) throw Error(ErrorCode::PlaneNotVisible, "plane passes through or behind the camera");

    SyntheticScene scene;
    scene.intrinsics = K;
    scene.depth = DepthImage(K.height, K.width);
    scene.normals.resize(3, static_cast<Eigen::Index>(K.width) * K.height);
    for (int v = 0; v < K.height; ++v) {
        for (int u = 0; u < K.width; ++u) {
            const double nr = n.vector().dot(pixel_ray(u, v, K));
            if (!(nr < 0.0)) throw Error(ErrorCode::PlaneNotVisible, "plane is seen edge-on or from behind");
            scene.depth(u, v) = static_cast<float>(-distance / nr);
            scene.normals.col(static_cast<Eigen::Index>(v) * K.width + u) = n.vector();
        }
    }
    scene.faceMasks["plane"] = PixelMask(K.height, K.width, true);
    scene.points["foot"] = -distance * n.vector();
    scene.directions["normal"] = n.vector();
    add_noise(scene, noise, seed);
    return scene;
}

SyntheticScene make_box_scene(const BoxSpec& spec, const CameraIntrinsics& K, std::uint64_t seed) {
    K.validate();
    if ((spec.halfExtents.array() <= 0.0).any()) throw Error(ErrorCode::DegenerateGeometry, "box has a zero-size face");
    if (spec.handleFace.size() != 2 || (spec.handleFace[0] != '+' && spec.handleFace[0] != '-') ||
        spec.handleFace[1] < 'x' || spec.handleFace[1] > 'z') {
        throw Error(ErrorCode::InvalidArgument, "unknown face '" + spec.handleFace + "'");
    }
    const Eigen::Isometry3d boxFromCamera = spec.cameraFromBox.inverse();
    const Eigen::Matrix3d R = spec.cameraFromBox.linear();

    SyntheticScene scene;
    scene.intrinsics = K;
    scene.depth = DepthImage(K.height, K.width, 0.0f);
    scene.normals = Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(K.width) * K.height);
    for (int v = 0; v < K.height; ++v) {
        for (int u = 0; u < K.width; ++u) {
            const auto hit = cast_box(pixel_ray(u, v, K), spec, boxFromCamera);
            if (!hit) continue;
            scene.depth(u, v) = static_cast<float>(hit->t);
            const Eigen::Vector3d n = R * (hit->sign * Eigen::Vector3d::Unit(hit->axis));
            scene.normals.col(static_cast<Eigen::Index>(v) * K.width + u) = n;
            auto [it, inserted] = scene.faceMasks.try_emplace(face_name(hit->axis, hit->sign), K.height, K.width, false);
            it->second(u, v) = true;
        }
    }

    const int a = spec.handleFace[1] - 'x';
    const int s = spec.handleFace[0] == '+' ? 1 : -1;
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    Eigen::Vector3d handleBox = Eigen::Vector3d::Zero();
    handleBox[a] = s * spec.halfExtents[a];
    handleBox[b] = spec.handleOffset.x() * spec.halfExtents[b];
    handleBox[c] = spec.handleOffset.y() * spec.halfExtents[c];
    const Eigen::Vector3d handle = spec.cameraFromBox * handleBox;
    const Eigen::Vector3d outward = R * (s * Eigen::Vector3d::Unit(a));
    if (!(handle.z() > 0.0) || !(outward.dot(handle) < 0.0)) {
        throw Error(ErrorCode::PlaneNotVisible, "handle face does not face the camera");
    }
    const Eigen::Vector2d uv = project(handle, K);
    const auto hit = cast_box(handle / handle.z(), spec, boxFromCamera);
    if (!in_image(uv.x(), uv.y(), K.width, K.height) || !hit || std::abs(hit->t - handle.z()) > 1e-9) {
        throw Error(ErrorCode::PlaneNotVisible, "handle point is occluded or outside the image");
    }
    scene.points["handle"] = handle;
    scene.directions["handle"] = outward;
    add_noise(scene, spec.noise, seed);
    return scene;
}

Eigen::Isometry3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
    const Eigen::Vector3d z = (target - eye).normalized();
    const Eigen::Vector3d y = (-up + up.dot(z) * z).normalized();
    const Eigen::Vector3d x = y.cross(z);
    Eigen::Matrix3d worldFromCamera;
    worldFromCamera << x, y, z;
    Eigen::Isometry3d cameraFromWorld = Eigen::Isometry3d::Identity();
    cameraFromWorld.linear() = worldFromCamera.transpose();
    cameraFromWorld.translation() = -worldFromCamera.transpose() * eye;
    return cameraFromWorld;
}

namespace {

BoxSpec posed_spec(Rng& rng, const Eigen::Vector3d& handle, double yaw, double pitch, double noise) {
    BoxSpec spec;
    const double dist = uniform(rng, 0.6, 0.9);
    const Eigen::Vector3d eye =
        handle + dist * Eigen::Vector3d(std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch));
    const Eigen::Vector3d target = handle + Eigen::Vector3d(uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04), 0.0);
    spec.cameraFromBox = look_at(eye, target, Eigen::Vector3d::UnitY());
    spec.noise = noise;
    return spec;
}

}  // namespace

BoxSpec drawer_front_spec(std::uint64_t seed, double noise) {
    Rng rng(seed);
    const Eigen::Vector2d offset(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
    const Eigen::Vector3d half{0.20, 0.15, 0.10};
    const Eigen::Vector3d handle(offset.x() * half.x(), offset.y() * half.y(), half.z());
    const double yaw = uniform(rng, -30.0, 30.0) * kDeg;
    const double pitch = uniform(rng, -20.0, 20.0) * kDeg;
    BoxSpec spec = posed_spec(rng, handle, yaw, pitch, noise);
    spec.halfExtents = half;
    spec.handleFace = "+z";
    spec.handleOffset = offset;
    return spec;
}

BoxSpec box_corner_spec(std::uint64_t seed, double noise) {
    Rng rng(seed);
    const Eigen::Vector3d half{0.20, 0.15, 0.20};
    const Eigen::Vector2d offset(1.0, uniform(rng, -0.3, 0.3));
    const Eigen::Vector3d handle(half.x(), offset.y() * half.y(), half.z());
    const double yaw = uniform(rng, 35.0, 55.0) * kDeg;
    const double pitch = uniform(rng, -15.0, 15.0) * kDeg;
    BoxSpec spec = posed_spec(rng, handle, yaw, pitch, noise);
    spec.halfExtents = half;
    spec.handleFace = "+z";
    spec.handleOffset = offset;
    return spec;
}

AffineWarp AffineWarp::inverse() const {
    if (std::abs(linear.determinant()) < 1e-12) throw Error(ErrorCode::NonInvertibleWarp, "warp is not invertible");
    const Eigen::Matrix2d inv = linear.inverse();
    return {inv, -inv * translation};
}

AffineWarp AffineWarp::similarity(double angle, double scale, const Eigen::Vector2d& center) {
    const Eigen::Matrix2d L = scale * Eigen::Rotation2Dd(angle).toRotationMatrix();
    return {L, center - L * center};
}

Eigen::VectorXf coordinate_code(const Eigen::Vector2d& gridPos, int gridH, int gridW, int channels, std::uint64_t seed) {
    const int pairs = channels / 4;
    // Every frequency stays below pi / L, so each term decreases strictly in
    // |offset| for offsets up to L and the code's self-similarity peak is unique.
    const double L = 2.0 * std::max(gridH, gridW);
    Rng rng(seed);
    Eigen::VectorXd code = Eigen::VectorXd::Zero(channels);
    for (int k = 0; k < pairs; ++k) {
        const double w = std::numbers::pi * (k + 1) / (pairs * L);
        const double phx = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double phy = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        code[4 * k + 0] = std::cos(w * gridPos.x() + phx);
        code[4 * k + 1] = std::sin(w * gridPos.x() + phx);
        code[4 * k + 2] = std::cos(w * gridPos.y() + phy);
        code[4 * k + 3] = std::sin(w * gridPos.y() + phy);
    }
    return (code / std::sqrt(2.0 * pairs)).cast<float>();
}

FeaturePair make_coordinate_features(int gridH, int gridW, int channels, const AffineWarp& warp, std::uint64_t seed,
                                     int imageH, int imageW) {
    if (channels < 4) throw Error(ErrorCode::InvalidArgument, "coordinate features need at least 4 channels");
    if (gridH <= 0 || gridW <= 0) throw Error(ErrorCode::InvalidArgument, "grid must be non-empty");
    const AffineWarp inv = warp.inverse();
    imageH = imageH > 0 ? imageH : gridH;
    imageW = imageW > 0 ? imageW : gridW;

    FeaturePair out{DenseFeatureMap(gridH, gridW, channels, imageH, imageW),
                    DenseFeatureMap(gridH, gridW, channels, imageH, imageW)};
    for (int y = 0; y < gridH; ++y) {
        for (int x = 0; x < gridW; ++x) {
            const Eigen::Vector2d p(x, y);
            out.source.cell(y, x) = coordinate_code(p, gridH, gridW, channels, seed).transpose();
            out.target.cell(y, x) = coordinate_code(inv(p), gridH, gridW, channels, seed).transpose();
        }
    }
    out.source.normalized = true;
    out.target.normalized = true;
    return out;
}

Embedding random_embedding(int dim, EmbeddingKind kind, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = standard_normal(rng);
    return {kind, (v / v.norm()).cast<float>()};
}

Embedding embedding_near(const Embedding& base, double similarity, std::uint64_t seed) {
    const Eigen::VectorXd u = base.values.cast<double>().normalized();
    Rng rng(seed);
    Eigen::VectorXd g(u.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = standard_normal(rng);
    g -= g.dot(u) * u;
    g.normalize();
    const Eigen::VectorXd v = similarity * u + std::sqrt(std::max(0.0, 1.0 - similarity * similarity)) * g;
    return {base.kind, v.normalized().cast<float>()};
}

}  // namespace ram
