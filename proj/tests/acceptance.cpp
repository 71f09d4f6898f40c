// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#define DOCTEST_CONFIG_DISABLE  // only the scratch-directory helpers are used here

#include "ram/formats.hpp"
#include "ram/lift.hpp"
#include "ram/memory.hpp"
#include "ram/pipeline.hpp"
#include "ram/random.hpp"
#include "ram/retrieval.hpp"
#include "ram/synth.hpp"
#include "ram/transfer.hpp"
#include "test_util.hpp"

using namespace ram;
using Eigen::Vector2d;
using Eigen::Vector3d;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double angle3(const Vector3d& a, const Vector3d& b) { return deg(std::atan2(a.cross(b).norm(), a.dot(b))); }

DenseFeatureMap random_map(int gh, int gw, int c, Rng& rng) {
    DenseFeatureMap m(gh, gw, c, gh, gw);
    for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = static_cast<float>(standard_normal(rng));
    return normalize_features(m);
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(RAM_CLI) + " " + args + " >/dev/null").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

// 1 ------------------------------------------------------------------------
Outcome identity_retrieval() {
    const int trials = 50;
    const int entries = 24;
    const int g = 32;
    int hits = 0;
    int exactZero = 0;
    const auto t0 = Clock::now();
    for (int t = 0; t < trials; ++t) {
        Rng rng(1000 + t);
        const std::uint64_t codeSeed = rng();
        const DenseFeatureMap target = make_coordinate_features(g, g, 32, AffineWarp{}, codeSeed).source;
        const std::size_t own = uniform_index(rng, entries);

        std::vector<AffordanceEntry> meta(entries);
        std::vector<DenseFeatureMap> maps(entries);
        for (int i = 0; i < entries; ++i) {
            meta[i].id = "e" + std::to_string(100 + i);
            if (static_cast<std::size_t>(i) == own) {
                maps[i] = target;
            } else if (i % 3 == 0) {
                maps[i] = random_map(g, g, 32, rng);
            } else {
                AffineWarp w = AffineWarp::similarity(uniform(rng, -0.3, 0.3), uniform(rng, 0.9, 1.1), {g / 2.0, g / 2.0});
                w.translation += Vector2d(uniform(rng, -4, 4), uniform(rng, -4, 4));
                maps[i] = make_coordinate_features(g, g, 32, w, codeSeed).target;
            }
        }
        std::vector<GeometricCandidate> cands;
        for (int i = 0; i < entries; ++i) cands.push_back({&meta[i], &maps[i], nullptr});
        const GeometricResult r = geometric_retrieve(cands, target, nullptr);
        hits += r.best == own ? 1 : 0;
        exactZero += r.scores[own] == 0.0 ? 1 : 0;
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "top-1 " << hits << "/" << trials << ", IMD exactly 0 in " << exactZero << "/" << trials << ", " << entries
      << " entries, " << secs << " s";
    return {hits == trials && exactZero == trials && secs < 10.0, d.str()};
}

// 2 ------------------------------------------------------------------------
Outcome warp_transfer() {
    const int g = 64;
    const int trials = 100;
    int translationExact = 0;
    double worstAffine = 0.0;
    int affineOk = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(2000 + t);
        const std::uint64_t codeSeed = rng();
        const int sx = static_cast<int>(uniform_index(rng, 11)) - 5;
        const int sy = static_cast<int>(uniform_index(rng, 11)) - 5;
        const Vector2d dir = Vector2d(standard_normal(rng), standard_normal(rng)).normalized();

        // Track on cell centers; image size equals the grid so one cell is one pixel.
        const Vector2d c0(16 + uniform_index(rng, 32), 16 + uniform_index(rng, 32));
        Waypoints w;
        for (int i = 0; i < 6; ++i) w.push_back((c0 + 2.0 * i * dir).array().round().matrix());

        const FeaturePair tp = make_coordinate_features(g, g, 32, AffineWarp::translate(sx, sy), codeSeed, g, g);
        const Affordance2D a = transfer_affordance(w, tp.source, tp.target, nullptr);
        translationExact += a.contact == w.front() + Vector2d(sx, sy) ? 1 : 0;

        AffineWarp warp = AffineWarp::similarity(uniform(rng, -10.0, 10.0) * std::numbers::pi / 180.0,
                                                 uniform(rng, 0.95, 1.05), {g / 2.0, g / 2.0});
        warp.translation += Vector2d(uniform(rng, -3, 3), uniform(rng, -3, 3));
        const FeaturePair ap = make_coordinate_features(g, g, 32, warp, codeSeed, g, g);
        const Affordance2D b = transfer_affordance(w, ap.source, ap.target, nullptr);
        const double err = (b.contact - warp(w.front())).norm();
        worstAffine = std::max(worstAffine, err);
        affineOk += err <= 3.0 ? 1 : 0;
    }
    std::ostringstream d;
    d << "translation exact " << translationExact << "/" << trials << "; affine within 3 px " << affineOk << "/" << trials
      << " (worst " << worstAffine << " px)";
    return {translationExact == trials && affineOk == trials, d.str()};
}

// 3 ------------------------------------------------------------------------
Outcome ransac_robustness() {
    const int trials = 100;
    int within = 0;
    int signOk = 0;
    int agreesWithOrder = 0;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(3000 + t);
        const double a = uniform(rng, 0, 2 * std::numbers::pi);
        const Vector2d dir(std::cos(a), std::sin(a));
        const Vector2d origin(uniform(rng, 60, 140), uniform(rng, 60, 140));
        std::vector<Vector2d> inl;
        for (int i = 0; i < 70; ++i)
            inl.push_back(origin + (i - 35) * 1.5 * dir + Vector2d(standard_normal(rng), standard_normal(rng)) * 0.3);
        // 30 uniform outliers interleaved at random positions of the sequence
        std::vector<Vector2d> pts;
        std::size_t next = 0;
        for (int i = 0; i < 100; ++i) {
            const bool outlier = pts.size() - next < 30 && (next == inl.size() || uniform01(rng) < 0.3);
            if (outlier) {
                pts.emplace_back(uniform(rng, 0, 200), uniform(rng, 0, 200));
            } else {
                pts.push_back(inl[next++]);
            }
        }
        while (next < inl.size()) pts.push_back(inl[next++]);

        const LineFit f = ransac_line(pts, 256, 3.0, 77 + t);
        // line direction is an axis; the sign is scored separately below
        const double err = deg(std::acos(std::min(1.0, std::abs(f.direction.vector().dot(dir)))));
        worst = std::max(worst, err);
        within += err <= 2.0 ? 1 : 0;
        agreesWithOrder += f.direction.vector().dot(dir) > 0.0 ? 1 : 0;
        const auto first = std::find(f.inliers.begin(), f.inliers.end(), true) - f.inliers.begin();
        const auto last = f.inliers.rend() - std::find(f.inliers.rbegin(), f.inliers.rend(), true) - 1;
        signOk += f.direction.vector().dot(pts[last] - pts[first]) > 0.0 ? 1 : 0;
    }
    std::ostringstream d;
    d << "line direction within 2 deg " << within << "/" << trials << " (worst " << worst << " deg), sign contract "
      << signOk << "/" << trials << " (points along generation order in " << agreesWithOrder << "/" << trials << ")";
    return {within >= 99 && signOk == trials, d.str()};
}

// 4 ------------------------------------------------------------------------
const CameraIntrinsics kCam{262.5, 262.5, 159.5, 119.5, 320, 240};

Outcome lifting_accuracy() {
    int ok = 0;
    int total = 0;
    double worstAngle = 0.0;
    double worstContact = 0.0;
    std::ostringstream fails;
    for (const double noise : {0.0, 0.002}) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const SyntheticScene s = make_box_scene(drawer_front_spec(seed, noise), kCam, seed);
            const Vector3d h = s.points.at("handle");
            const Vector3d n = s.directions.at("handle");
            Affordance2D a;
            a.contact = project(h, kCam);
            a.direction = project_direction(h, UnitVec3::normalize(n), kCam);
            const Affordance3D r = lift_affordance(a, s.depth, kCam, {}, seed);
            const double ang = angle3(r.direction.vector(), n);
            const double dist = (r.contact - h).norm();
            worstAngle = std::max(worstAngle, ang);
            worstContact = std::max(worstContact, dist);
            ++total;
            if (ang <= 5.0 && dist <= 0.005) {
                ++ok;
            } else {
                fails << " [noise " << noise << " seed " << seed << ": " << ang << " deg, " << dist * 1000 << " mm]";
            }
        }
    }
    std::ostringstream d;
    d << ok << "/" << total << " within 5 deg and 5 mm (worst " << worstAngle << " deg, " << worstContact * 1000 << " mm)"
      << fails.str();
    return {ok == total, d.str()};
}

// 5 ------------------------------------------------------------------------
Outcome corner_clustering() {
    const int trials = 50;
    int ok = 0;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t seed = 5000 + t;
        const BoxSpec spec = box_corner_spec(seed);
        const SyntheticScene s = make_box_scene(spec, kCam, seed);
        const Vector3d nz = spec.cameraFromBox.linear() * Vector3d::UnitZ();
        const Vector3d nx = spec.cameraFromBox.linear() * Vector3d::UnitX();
        const PointCloud local = crop_cloud(depth_to_cloud(s.depth, kCam), s.points.at("handle"), 0.10);
        const auto clusters = cluster_normals(estimate_normals(local, 30), 4, seed);
        if (clusters.size() < 2) continue;
        const Vector3d a = clusters[0].center.vector();
        const Vector3d b = clusters[1].center.vector();
        const double e = std::min(std::max(angle3(a, nz), angle3(b, nx)), std::max(angle3(a, nx), angle3(b, nz)));
        worst = std::max(worst, e);
        ok += e <= 5.0 ? 1 : 0;
    }
    std::ostringstream d;
    d << ok << "/" << trials << " with both dominant clusters within 5 deg (worst " << worst << " deg)";
    return {ok == trials, d.str()};
}

// 6 ------------------------------------------------------------------------
double imd_oracle(const DenseFeatureMap& s, const DenseFeatureMap& t) {
    double total = 0.0;
    for (int i = 0; i < s.cells(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < t.cells(); ++j)
            best = std::min(best, (s.data.row(i).cast<double>() - t.data.row(j).cast<double>()).norm());
        total += best;
    }
    return total / s.cells();
}

Outcome brute_force() {
    const int n = 100;
    int bm = 0, gr = 0, geo = 0, crop = 0;
    Rng rng(6000);
    for (int t = 0; t < n; ++t) {
        // best_match
        DenseFeatureMap m = random_map(12, 12, 8, rng);
        for (int z = 0; z < 4; ++z) m.data.row(uniform_index(rng, 144)).setZero();
        Eigen::VectorXf qv(8);
        for (int c = 0; c < 8; ++c) qv[c] = static_cast<float>(standard_normal(rng));
        int arg = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 144; ++i) {
            const Eigen::VectorXd row = m.data.row(i).transpose().cast<double>();
            if (row.norm() == 0.0) continue;
            const double sc = row.dot(qv.cast<double>()) / (row.norm() * qv.cast<double>().norm());
            if (sc > best) best = sc, arg = i;
        }
        bm += best_match(qv, m).cell == arg ? 1 : 0;

        // select_grasp
        std::vector<GraspCandidate> g(1 + uniform_index(rng, 20));
        for (auto& x : g) x.position = Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2));
        const Vector3d c(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2));
        std::size_t ga = 0;
        for (std::size_t i = 1; i < g.size(); ++i)
            if ((g[i].position - c).norm() < (g[ga].position - c).norm()) ga = i;
        gr += select_grasp(g, c).index == ga ? 1 : 0;

        // geometric_retrieve argmin
        const int k = 2 + static_cast<int>(uniform_index(rng, 5));
        const DenseFeatureMap target = random_map(5, 5, 6, rng);
        std::vector<AffordanceEntry> meta(k);
        std::vector<DenseFeatureMap> maps;
        for (int i = 0; i < k; ++i) {
            meta[i].id = "c" + std::to_string(uniform_index(rng, 1000));
            maps.push_back(random_map(5, 5, 6, rng));
        }
        std::vector<GeometricCandidate> cands;
        for (int i = 0; i < k; ++i) cands.push_back({&meta[i], &maps[i], nullptr});
        std::size_t oa = 0;
        std::vector<double> os(k);
        for (int i = 0; i < k; ++i) {
            os[i] = imd_oracle(maps[i], target);
            if (os[i] < os[oa] || (os[i] == os[oa] && meta[i].id < meta[oa].id)) oa = i;
        }
        const GeometricResult r = geometric_retrieve(cands, target, nullptr);
        bool scoresOk = true;
        for (int i = 0; i < k; ++i) scoresOk &= std::abs(r.scores[i] - os[i]) < 1e-12;
        geo += r.best == oa && scoresOk ? 1 : 0;

        // crop_cloud
        PointCloud cloud;
        const int np = 50 + static_cast<int>(uniform_index(rng, 200));
        cloud.points.resize(3, np);
        for (int i = 0; i < np; ++i) {
            cloud.points.col(i) = Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0.5, 2));
            cloud.pixels.push_back(i);
        }
        const Vector3d center = cloud.points.col(uniform_index(rng, np));
        const double radius = uniform(rng, 0.1, 0.8);
        std::vector<int> expect;
        for (int i = 0; i < np; ++i)
            if ((cloud.points.col(i) - center).norm() <= radius) expect.push_back(i);
        const PointCloud got = crop_cloud(cloud, center, radius);
        bool same = got.size() == static_cast<Eigen::Index>(expect.size());
        for (std::size_t i = 0; same && i < expect.size(); ++i)
            same = got.pixels[i] == expect[i] && got.points.col(static_cast<Eigen::Index>(i)) == cloud.points.col(expect[i]);
        crop += same ? 1 : 0;
    }
    std::ostringstream d;
    d << "best_match " << bm << "/" << n << ", select_grasp " << gr << "/" << n << ", geometric argmin " << geo << "/" << n
      << ", crop_cloud " << crop << "/" << n;
    return {bm == n && gr == n && geo == n && crop == n, d.str()};
}

// 7 ------------------------------------------------------------------------
Outcome determinism() {
    test::TempDir dir("accept-det");
    write_fixture(dir.path(), FixtureSpec{10, 32, 32, 128, 21});
    const std::string query = "--scene " + q(dir / "scene.json") + " --memory " + q(dir / "memory") + " --instruction " +
                              q(dir / "instruction.emb") + " --object " + q(dir / "object.emb") + " --grasps " +
                              q(dir / "grasps.json");
    const int ca = run_cli("infer " + query + " --out " + q(dir / "a"));
    const int cb = run_cli("infer " + query + " --out " + q(dir / "b"));
    bool inferSame = ca == 0 && cb == 0;
    for (const char* f : {"affordance.json", "retrieval.json", "overlay.png"}) {
        const std::string x = test::slurp(dir / (std::string("a/") + f));
        inferSame = inferSame && !x.empty() && x == test::slurp(dir / (std::string("b/") + f));
    }

    Rng rng(7000);
    int formatOk = 0;
    const int rounds = 20;
    for (int t = 0; t < rounds; ++t) {
        const int h = 1 + static_cast<int>(uniform_index(rng, 12));
        const int w = 1 + static_cast<int>(uniform_index(rng, 12));
        DenseFeatureMap m(h, w, 1 + static_cast<int>(uniform_index(rng, 9)), 4 * h, 4 * w);
        for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = static_cast<float>(standard_normal(rng));
        if (t % 2 == 0) m = normalize_features(m);
        Embedding e = random_embedding(1 + static_cast<int>(uniform_index(rng, 64)), t % 2 ? EmbeddingKind::Text : EmbeddingKind::Image, rng());
        DepthImage d(h, w);
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u)
                d(u, v) = uniform01(rng) < 0.2 ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(uniform(rng, 0.2, 3));
        PixelMask k(h, w);
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) k(u, v) = uniform01(rng) < 0.5;

        save_feature_map(m, dir / "x.dfm");
        save_feature_map(load_feature_map(dir / "x.dfm"), dir / "y.dfm");
        save_embedding(e, dir / "x.emb");
        save_embedding(load_embedding(dir / "x.emb"), dir / "y.emb");
        save_depth(d, dir / "x.dpt");
        save_depth(load_depth(dir / "x.dpt"), dir / "y.dpt");
        save_mask(k, dir / "x.msk");
        save_mask(load_mask(dir / "x.msk"), dir / "y.msk");
        bool ok = true;
        for (const char* ext : {".dfm", ".emb", ".dpt", ".msk"})
            ok = ok && test::slurp(dir / (std::string("x") + ext)) == test::slurp(dir / (std::string("y") + ext));
        formatOk += ok ? 1 : 0;
    }

    const AffordanceMemory m = load_memory(dir.path() / "memory" / "memory.json");
    save_memory(m, dir.path() / "memory" / "copy.json");
    const bool manifestOk = load_memory(dir.path() / "memory" / "copy.json") == m;

    std::ostringstream d;
    d << "infer byte-identical " << (inferSame ? "yes" : "no") << ", format round trips " << formatOk << "/" << rounds
      << ", manifest " << (manifestOk ? "equal" : "differs");
    return {inferSame && formatOk == rounds && manifestOk, d.str()};
}

// 8 ------------------------------------------------------------------------
Outcome monotone_filtering() {
    const int draws = 1000;
    int ok = 0;
    Rng rng(8000);
    for (int t = 0; t < draws; ++t) {
        const int n = 1 + static_cast<int>(uniform_index(rng, 12));
        const int dim = 4 + static_cast<int>(uniform_index(rng, 12));
        std::vector<AffordanceEntry> entries(n);
        std::vector<const AffordanceEntry*> ptrs;
        for (int i = 0; i < n; ++i) {
            entries[i].id = "s" + std::to_string(i);
            entries[i].imageEmbedding = random_embedding(dim, EmbeddingKind::Image, rng());
            ptrs.push_back(&entries[i]);
        }
        const Embedding img = random_embedding(dim, EmbeddingKind::Image, rng());
        const Embedding name = random_embedding(dim, EmbeddingKind::Text, rng());
        double lo = uniform(rng, -1, 1);
        double hi = uniform(rng, -1, 1);
        if (lo > hi) std::swap(lo, hi);
        const auto a = semantic_filter(ptrs, img, name, lo).retained();
        const auto b = semantic_filter(ptrs, img, name, hi).retained();
        const std::set<const AffordanceEntry*> sa(a.begin(), a.end());
        ok += std::all_of(b.begin(), b.end(), [&](const AffordanceEntry* e) { return sa.count(e) == 1; }) && !b.empty() ? 1 : 0;
    }
    std::ostringstream d;
    d << "subset property " << ok << "/" << draws;
    return {ok == draws, d.str()};
}

// 9 ------------------------------------------------------------------------
Outcome end_to_end_runtime() {
    test::TempDir dir("accept-e2e");
    write_fixture(dir.path(), FixtureSpec{100, 64, 32, 256, 9});
    const std::string args = "infer --scene " + q(dir / "scene.json") + " --memory " + q(dir / "memory") +
                             " --instruction " + q(dir / "instruction.emb") + " --object " + q(dir / "object.emb") +
                             " --grasps " + q(dir / "grasps.json") + " --out " + q(dir / "out");
    const auto t0 = Clock::now();
    const int code = run_cli(args);
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "100 entries at 64x64x32: exit " << code << ", " << secs << " s";
    return {code == 0 && secs < 5.0, d.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"identity retrieval", identity_retrieval},
        {"warp transfer", warp_transfer},
        {"ransac robustness", ransac_robustness},
        {"lifting accuracy", lifting_accuracy},
        {"corner clustering", corner_clustering},
        {"brute-force equivalence", brute_force},
        {"determinism and round trips", determinism},
        {"monotone filtering", monotone_filtering},
        {"end-to-end runtime", end_to_end_runtime},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
