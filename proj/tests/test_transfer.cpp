#include <cmath>
#include <numbers>
#include <optional>

#include <doctest.h>

#include "ram/random.hpp"
#include "ram/synth.hpp"
#include "ram/transfer.hpp"
#include "test_util.hpp"

using namespace ram;
using Eigen::Vector2d;

namespace {

double angle_deg(const Vector2d& a, const Vector2d& b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// Waypoints on cell centers of a map with the given pixel scale.
Waypoints cell_track(int r0, int c0, int dr, int dc, int n, double scale) {
    Waypoints w;
    for (int i = 0; i < n; ++i) w.emplace_back((c0 + i * dc + 0.5) * scale - 0.5, (r0 + i * dr + 0.5) * scale - 0.5);
    return w;
}

}  // namespace

TEST_SUITE("transfer") {

TEST_CASE("identity transfer returns the source waypoints within a cell") {
    const FeaturePair p = make_coordinate_features(32, 32, 32, AffineWarp{}, 5, 128, 128);
    Rng rng(1);
    Waypoints w;
    for (int i = 0; i < 12; ++i) w.emplace_back(uniform(rng, 0, 127), uniform(rng, 0, 127));
    const auto m = transfer_waypoints(w, p.source, p.source);
    REQUIRE(m.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK((m[i].pixel - w[i]).cwiseAbs().maxCoeff() <= 4.0);
}

TEST_CASE("translation shifts every waypoint exactly") {
    for (const double scale : {1.0, 4.0}) {
        const int g = 40;
        const int img = static_cast<int>(g * scale);
        const FeaturePair p = make_coordinate_features(g, g, 32, AffineWarp::translate(3, 2), 13, img, img);
        const Waypoints w = cell_track(5, 6, 2, 3, 8, scale);
        const auto m = transfer_waypoints(w, p.source, p.target);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(m[i].pixel == w[i] + scale * Vector2d(3, 2));
    }
}

TEST_CASE("scores are the cosine of the sampled source feature and the matched cell") {
    const FeaturePair p = make_coordinate_features(24, 24, 16, AffineWarp::similarity(0.2, 1.05, {12, 12}), 3, 96, 96);
    Rng rng(2);
    Waypoints w;
    for (int i = 0; i < 10; ++i) w.emplace_back(uniform(rng, 20, 76), uniform(rng, 20, 76));
    const auto m = transfer_waypoints(w, p.source, p.target);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Eigen::VectorXf q = sample_feature(p.source, w[i].x(), w[i].y());
        const Eigen::Vector2d g = p.target.to_grid(m[i].pixel.x(), m[i].pixel.y());
        const int cell = static_cast<int>(std::lround(g.y())) * 24 + static_cast<int>(std::lround(g.x()));
        CHECK(m[i].score == doctest::Approx(cosine(q, p.target.data.row(cell).transpose())).epsilon(1e-9));
    }
}

TEST_CASE("ransac_line examples") {
    std::vector<Vector2d> line;
    for (int i = 0; i < 10; ++i) line.emplace_back(3.0 * i, 7.0);
    const LineFit a = ransac_line(line, 64, 1.0, 0);
    CHECK(a.direction[0] == doctest::Approx(1.0));
    CHECK(std::abs(a.direction[1]) < 1e-12);
    CHECK(std::count(a.inliers.begin(), a.inliers.end(), true) == 10);

    std::reverse(line.begin(), line.end());
    CHECK(ransac_line(line, 64, 1.0, 0).direction[0] == doctest::Approx(-1.0));

    std::vector<Vector2d> mixed;
    const Vector2d dir = Vector2d(2, 1).normalized();
    for (int i = 0; i < 7; ++i) mixed.push_back(Vector2d(10, 10) + 5.0 * i * dir);
    mixed.insert(mixed.begin() + 2, Vector2d(60, -20));
    mixed.insert(mixed.begin() + 5, Vector2d(-30, 50));
    mixed.push_back(Vector2d(5, 80));
    const LineFit b = ransac_line(mixed, 256, 3.0, 42);
    CHECK_FALSE(b.inliers[2]);
    CHECK_FALSE(b.inliers[5]);
    CHECK_FALSE(b.inliers[9]);
    CHECK(std::count(b.inliers.begin(), b.inliers.end(), true) == 7);
    CHECK(angle_deg(b.direction.vector(), dir) < 2.0);

    CHECK_THROWS_CODE(ransac_line(std::vector<Vector2d>{{1, 1}}, 10, 1.0, 0), ErrorCode::InsufficientPoints);
    CHECK_THROWS_CODE(ransac_line(std::vector<Vector2d>{{1, 1}, {1, 1}, {1, 1}}, 10, 1.0, 0), ErrorCode::DegenerateLine);
}

TEST_CASE("ransac_line sign follows the temporal order of inliers") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(uniform_index(rng, 15));
        std::vector<Vector2d> pts;
        for (int i = 0; i < n; ++i) pts.emplace_back(uniform(rng, 0, 50), uniform(rng, 0, 50));
        std::optional<LineFit> fit;
        try {
            fit = ransac_line(pts, 50, 2.0, rng());
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateLine);
            continue;
        }
        const LineFit& f = *fit;
        const auto first = std::find(f.inliers.begin(), f.inliers.end(), true) - f.inliers.begin();
        const auto last = f.inliers.rend() - std::find(f.inliers.rbegin(), f.inliers.rend(), true) - 1;
        CHECK(f.direction.vector().dot(pts[last] - pts[first]) >= 0.0);
        CHECK(std::abs(f.direction.vector().norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("ransac_line is deterministic for a seed") {
    Rng rng(4);
    std::vector<Vector2d> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(uniform(rng, 0, 100), uniform(rng, 0, 100));
    const LineFit a = ransac_line(pts, 100, 5.0, 77);
    const LineFit b = ransac_line(pts, 100, 5.0, 77);
    CHECK(a.direction == b.direction);
    CHECK(a.inliers == b.inliers);
}

TEST_CASE("transfer_affordance") {
    const int g = 48;
    const double scale = 4.0;
    const Waypoints w = cell_track(10, 8, 1, 2, 9, scale);

    SUBCASE("identity") {
        const FeaturePair p = make_coordinate_features(g, g, 32, AffineWarp{}, 2, 192, 192);
        const Affordance2D a = transfer_affordance(w, p.source, p.source, nullptr);
        CHECK((a.contact - w.front()).cwiseAbs().maxCoeff() <= scale);
        CHECK((a.direction.vector() - (w.back() - w.front()).normalized()).norm() < 1e-9);
        CHECK(a.contact == a.matched.front().pixel);
        CHECK(a.meanScore == doctest::Approx(1.0));
    }
    SUBCASE("translation moves the contact and keeps the direction") {
        const FeaturePair p = make_coordinate_features(g, g, 32, AffineWarp::translate(-4, 5), 2, 192, 192);
        const Affordance2D id = transfer_affordance(w, p.source, p.source, nullptr);
        const Affordance2D a = transfer_affordance(w, p.source, p.target, nullptr);
        CHECK(a.contact == w.front() + scale * Vector2d(-4, 5));
        CHECK((a.direction.vector() - id.direction.vector()).norm() < 1e-6);
    }
    SUBCASE("random target is rejected") {
        // wide random features: best cosine against 256 cells stays near 3/sqrt(512)
        const FeaturePair p = make_coordinate_features(g, g, 512, AffineWarp{}, 2, 192, 192);
        Rng rng(5);
        DenseFeatureMap noise(16, 16, 512, 192, 192);
        for (Eigen::Index i = 0; i < noise.data.size(); ++i) noise.data.data()[i] = static_cast<float>(standard_normal(rng));
        CHECK_THROWS_CODE(transfer_affordance(w, p.source, normalize_features(noise), nullptr), ErrorCode::LowConfidenceTransfer);
    }
    SUBCASE("contact survives as an outlier") {
        Waypoints bent = w;
        bent[0] += Vector2d(0, 40);
        const FeaturePair p = make_coordinate_features(g, g, 32, AffineWarp{}, 2, 192, 192);
        const Affordance2D a = transfer_affordance(bent, p.source, p.source, nullptr);
        CHECK_FALSE(a.inliers[0]);
        CHECK(a.contact == a.matched.front().pixel);
        CHECK((a.contact - bent[0]).cwiseAbs().maxCoeff() <= scale);
    }
    SUBCASE("mask restricts the search") {
        const FeaturePair p = make_coordinate_features(g, g, 32, AffineWarp{}, 2, 192, 192);
        PixelMask right(192, 192);
        for (int v = 0; v < 192; ++v)
            for (int u = 96; u < 192; ++u) right(u, v) = true;
        TransferParams loose;
        loose.scoreFloor = -1.0;
        const Affordance2D a = transfer_affordance(w, p.source, p.source, &right, loose);
        for (const auto& m : a.matched) CHECK(m.pixel.x() >= 96);
    }
    CHECK_THROWS_CODE(transfer_waypoints({{1, 1}}, DenseFeatureMap(), DenseFeatureMap(), nullptr), ErrorCode::NotNormalized);
}

}  // TEST_SUITE
