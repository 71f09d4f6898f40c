#include "ram/pipeline.hpp"

#include <fstream>

#include "ram/formats.hpp"
#include "ram/random.hpp"
#include "ram/synth.hpp"

namespace ram {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what(), path.string());
    }
}

template <typename Derived>
json vec_json(const Eigen::MatrixBase<Derived>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const json& j) {
    if (!j.is_array() || j.size() != N) throw Error(ErrorCode::InvalidArgument, "expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw e.stage().empty() ? e.with_stage(name) : e;
    }
}

}  // namespace

SceneBundle load_scene_bundle(const fs::path& sceneJson) {
    const json j = read_json(sceneJson);
    const fs::path root = sceneJson.parent_path();
    auto path_of = [&](const char* key) -> fs::path {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw Error(ErrorCode::InvalidArgument, sceneJson.string() + ": missing '" + key + "'", sceneJson.string());
        }
        const fs::path p = j.at(key).get<std::string>();
        return p.is_absolute() ? p : root / p;
    };
    SceneBundle b;
    if (j.contains("image") && !j.at("image").is_null()) b.image = path_of("image");
    b.depth = path_of("depth");
    b.intrinsics = path_of("intrinsics");
    if (j.contains("mask") && !j.at("mask").is_null()) b.mask = path_of("mask");
    b.embedding = path_of("embedding");
    b.features = path_of("features");
    return b;
}

void save_scene_bundle(const SceneBundle& b, const fs::path& sceneJson) {
    const fs::path root = sceneJson.parent_path();
    auto rel = [&](const fs::path& p) { return p.lexically_relative(root).generic_string(); };
    json j{{"depth", rel(b.depth)}, {"intrinsics", rel(b.intrinsics)}, {"embedding", rel(b.embedding)},
           {"features", rel(b.features)}};
    if (b.image) j["image"] = rel(*b.image);
    if (b.mask) j["mask"] = rel(*b.mask);
    write_file_atomic(sceneJson, j.dump(2) + "\n");
}

Scene load_scene(const SceneBundle& b) {
    Scene s;
    s.intrinsics = load_intrinsics(b.intrinsics);
    s.depth = load_depth(b.depth);
    const int w = s.intrinsics.width;
    const int h = s.intrinsics.height;
    auto check = [&](int ww, int hh, const fs::path& p) {
        if (ww != w || hh != h) {
            throw Error(ErrorCode::DimensionMismatch,
                        p.string() + " is " + std::to_string(ww) + "x" + std::to_string(hh) + ", intrinsics say " +
                            std::to_string(w) + "x" + std::to_string(h),
                        p.string());
        }
    };
    check(s.depth.width(), s.depth.height(), b.depth);
    if (b.mask) {
        s.mask = load_mask(*b.mask);
        check(s.mask->width(), s.mask->height(), *b.mask);
        if (s.mask->count() == 0) throw Error(ErrorCode::EmptyMask, b.mask->string() + " selects no pixel", b.mask->string());
    }
    if (b.image) {
        s.image = read_png(*b.image);
        check(s.image->width, s.image->height, *b.image);
    }
    s.imageEmbedding = load_embedding(b.embedding);
    DenseFeatureMap f = load_feature_map(b.features);
    f.validate();
    check(f.imageWidth, f.imageHeight, b.features);
    s.features = f.normalized ? std::move(f) : normalize_features(f);
    return s;
}

RetrievalQuery make_query(const Scene& scene, const Embedding& instruction, const Embedding& objectName,
                          const PipelineConfig& config) {
    return {instruction, objectName, scene.imageEmbedding, scene.features, scene.mask, config.fallbackTasks};
}

Affordance2D run_transfer(const Scene& scene, const AffordanceMemory& memory, const AffordanceEntry& entry,
                          const PipelineConfig& config) {
    return stage("transfer", [&] {
        const EntryAssets assets = load_assets(memory, entry);
        const PixelMask* mask = config.maskedCorrespondence && scene.mask ? &*scene.mask : nullptr;
        return transfer_affordance(entry.adjusted_waypoints(), assets.features, scene.features, mask, config.transfer);
    });
}

Affordance3D run_lift(const Scene& scene, const Affordance2D& affordance, const PipelineConfig& config) {
    return stage("lift", [&] { return lift_affordance(affordance, scene.depth, scene.intrinsics, config.lift, config.liftSeed); });
}

InferResult run_infer(const Scene& scene, const AffordanceMemory& memory, const Embedding& instruction,
                      const Embedding& objectName, const PipelineConfig& config,
                      const std::vector<GraspCandidate>* grasps) {
    const RetrievalResult retrieval =
        stage("retrieval", [&] { return retrieve(make_query(scene, instruction, objectName, config), memory, config.retrieval); });
    Affordance2D a2d = run_transfer(scene, memory, memory.entry(retrieval.entryId), config);
    Affordance3D a3d = run_lift(scene, a2d, config);
    InferResult result{retrieval, std::move(a2d), std::move(a3d), std::nullopt, std::nullopt};
    if (grasps) {
        result.graspChoice = stage("grasp", [&] { return select_grasp(*grasps, result.affordance3d.contact); });
        result.grasp = (*grasps)[result.graspChoice->index];
    }
    return result;
}

json to_json(const CameraIntrinsics& K) {
    return json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
    CameraIntrinsics K;
    try {
        K.fx = j.at("fx").get<double>();
        K.fy = j.at("fy").get<double>();
        K.cx = j.at("cx").get<double>();
        K.cy = j.at("cy").get<double>();
        K.width = j.at("width").get<int>();
        K.height = j.at("height").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad intrinsics: ") + e.what());
    }
    K.validate();
    return K;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
    try {
        return intrinsics_from_json(read_json(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what(), path.string());
    }
}

json to_json(const Affordance2D& a) {
    json waypoints = json::array();
    json scores = json::array();
    for (const auto& m : a.matched) {
        waypoints.push_back(vec_json(m.pixel));
        scores.push_back(m.score);
    }
    json inliers = json::array();
    for (const bool b : a.inliers) inliers.push_back(b);
    return json{{"contact", vec_json(a.contact)},
                {"direction", vec_json(a.direction.vector())},
                {"waypoints", std::move(waypoints)},
                {"scores", std::move(scores)},
                {"inliers", std::move(inliers)},
                {"mean_score", a.meanScore}};
}

Affordance2D affordance2d_from_json(const json& j) {
    try {
        Affordance2D a;
        a.contact = vec_from<2>(j.at("contact"));
        a.direction = UnitVec2::normalize(vec_from<2>(j.at("direction")));
        const auto& wps = j.at("waypoints");
        const json scores = j.value("scores", json::array());
        for (std::size_t i = 0; i < wps.size(); ++i) {
            a.matched.push_back({vec_from<2>(wps.at(i)), i < scores.size() ? scores.at(i).get<double>() : 0.0});
        }
        if (j.contains("inliers")) {
            for (const auto& b : j.at("inliers")) a.inliers.push_back(b.get<bool>());
        } else {
            a.inliers.assign(a.matched.size(), true);
        }
        a.meanScore = j.value("mean_score", 0.0);
        if (a.matched.empty()) a.matched.push_back({a.contact, a.meanScore});
        if (a.matched.front().pixel != a.contact) {
            throw Error(ErrorCode::InvalidArgument, "affordance contact must equal its first waypoint");
        }
        return a;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad 2D affordance: ") + e.what());
    }
}

json to_json(const Affordance3D& a) {
    json clusters = json::array();
    for (const auto& c : a.clusters) {
        clusters.push_back({{"center", vec_json(c.center.vector())},
                            {"count", c.count},
                            {"angle", c.angle ? json(*c.angle) : json(nullptr)}});
    }
    return json{{"contact", vec_json(a.contact)},
                {"direction", vec_json(a.direction.vector())},
                {"clusters", std::move(clusters)},
                {"contact_pixel", json::array({a.contactPixel.x(), a.contactPixel.y()})},
                {"contact_substituted", a.contactSubstituted},
                {"crop_size", a.cropSize}};
}

json to_json(const GraspCandidate& g) {
    const auto& q = g.orientation;
    return json{{"position", vec_json(g.position)}, {"quaternion", json::array({q.w(), q.x(), q.y(), q.z()})}, {"score", g.score}};
}

std::vector<GraspCandidate> grasps_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "grasp candidates must be a JSON array");
    std::vector<GraspCandidate> out;
    try {
        for (const auto& g : j) {
            const Eigen::Vector4d q = vec_from<4>(g.at("quaternion"));
            if (std::abs(q.norm() - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "grasp quaternion is not unit-norm");
            out.push_back({vec_from<3>(g.at("position")), Eigen::Quaterniond(q[0], q[1], q[2], q[3]), g.value("score", 0.0)});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad grasp candidate: ") + e.what());
    }
    return out;
}

json to_json(const RetrievalResult& r, const RetrievalParams& params) {
    json tasks = json::array();
    for (const auto& t : r.tasks) tasks.push_back({{"task", t.task}, {"distance", t.distance}});
    json entries = json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"id", e.id},
                           {"task", e.task},
                           {"semantic", e.semanticScore},
                           {"retained", e.retained},
                           {"imd", e.imd ? json(*e.imd) : json(nullptr)}});
    }
    return json{{"entry_id", r.entryId},
                {"task_score", r.taskScore},
                {"semantic_score", r.semanticScore},
                {"imd", r.imdScore},
                {"stage_trace",
                 {{"memory", r.stageTrace.memory},
                  {"task", r.stageTrace.task},
                  {"semantic", r.stageTrace.semantic},
                  {"geometric", r.stageTrace.geometric}}},
                {"tasks", std::move(tasks)},
                {"entries", std::move(entries)},
                {"semantic_fail_open", r.semanticFailOpen},
                {"warnings", r.warnings},
                {"metadata",
                 {{"imd_reduction", "mean"},
                  {"imd_target_masked", true},
                  {"semantic_threshold", params.semanticThreshold},
                  {"tie_break", "entry id"}}}};
}

json infer_json(const InferResult& r) {
    json j = to_json(r.affordance3d);
    j["affordance2d"] = to_json(r.affordance2d);
    j["entry_id"] = r.retrieval.entryId;
    j["warnings"] = r.retrieval.warnings;
    if (r.grasp) {
        j["grasp"] = to_json(*r.grasp);
        j["grasp"]["index"] = r.graspChoice->index;
        j["grasp"]["distance"] = r.graspChoice->distance;
    }
    return j;
}

// ---------------------------------------------------------------------------

json write_fixture(const fs::path& dir, const FixtureSpec& spec) {
    if (spec.entries < 1 || spec.grid < 4 || spec.channels < 4 || spec.imageSize < spec.grid) {
        throw Error(ErrorCode::InvalidArgument, "fixture needs >= 1 entry, grid >= 4, channels >= 4, image >= grid");
    }
    fs::create_directories(dir / "scene");
    fs::create_directories(dir / "memory" / "assets");
    fs::create_directories(dir / "memory" / "images");

    const int size = spec.imageSize;
    const CameraIntrinsics K{1.0 * size, 1.0 * size, (size - 1) / 2.0, (size - 1) / 2.0, size, size};
    const SyntheticScene scene = make_box_scene(drawer_front_spec(spec.seed), K, spec.seed);
    const Eigen::Vector3d handle = scene.points.at("handle");
    const UnitVec3 outward = UnitVec3::normalize(scene.directions.at("handle"));
    const Eigen::Vector2d handlePx = project(handle, K);
    const UnitVec2 tau = project_direction(handle, outward, K);

    PixelMask objectMask(size, size);
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u) objectMask(u, v) = scene.depth.valid(u, v);

    const std::uint64_t featureSeed = spec.seed * 7919 + 1;
    const DenseFeatureMap sceneFeatures =
        make_coordinate_features(spec.grid, spec.grid, spec.channels, AffineWarp{}, featureSeed, size, size).source;

    const int dim = 64;
    const Embedding openTask = random_embedding(dim, EmbeddingKind::Text, spec.seed + 1);
    const Embedding pickTask = random_embedding(dim, EmbeddingKind::Text, spec.seed + 2);
    const Embedding instruction = embedding_near(openTask, 0.95, spec.seed + 3);
    const Embedding objectName = random_embedding(dim, EmbeddingKind::Text, spec.seed + 4);
    Embedding sceneEmbedding = embedding_near(objectName, 0.9, spec.seed + 5);
    sceneEmbedding.kind = EmbeddingKind::Image;

    SceneBundle bundle{dir / "scene" / "image.png", dir / "scene" / "depth.dpt", dir / "scene" / "intrinsics.json",
                       dir / "scene" / "mask.msk", dir / "scene" / "embedding.emb", dir / "scene" / "features.dfm"};
    write_png(render_depth(scene.depth), *bundle.image);
    save_depth(scene.depth, bundle.depth);
    write_file_atomic(bundle.intrinsics, to_json(K).dump(2) + "\n");
    save_mask(objectMask, *bundle.mask);
    save_embedding(sceneEmbedding, bundle.embedding);
    save_feature_map(sceneFeatures, bundle.features);
    save_scene_bundle(bundle, dir / "scene.json");
    save_embedding(instruction, dir / "instruction.emb");
    save_embedding(objectName, dir / "object.emb");

    // Demonstration track: from the handle along the projected outward normal.
    double length = 40.0;
    while (!in_image(handlePx.x() + length * tau[0], handlePx.y() + length * tau[1], size, size)) length *= 0.8;
    const Eigen::Vector2d trackEnd = handlePx + length * tau.vector();
    write_png(render_depth(scene.depth), dir / "memory" / "images" / "demo.png");

    AffordanceMemory memory(dir / "memory");
    Rng rng(spec.seed * 31 + 17);
    const Eigen::Vector2d gridCenter((spec.grid - 1) / 2.0, (spec.grid - 1) / 2.0);
    const double scale = static_cast<double>(size) / spec.grid;
    auto to_grid = [&](const Eigen::Vector2d& px) { return Eigen::Vector2d((px.array() + 0.5) / scale - 0.5); };
    auto to_px = [&](const Eigen::Vector2d& g) { return Eigen::Vector2d((g.array() + 0.5) * scale - 0.5); };

    for (int i = 0; i < spec.entries; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "demo-%03d", i);
        const bool pickTaskEntry = i % 4 == 3;
        const bool offTopic = !pickTaskEntry && i % 5 == 4;

        AffineWarp warp;
        Eigen::Vector2d start = handlePx;
        Eigen::Vector2d end = trackEnd;
        if (i > 0) {
            for (int attempt = 0;; ++attempt) {
                const AffineWarp sim = AffineWarp::similarity(uniform(rng, -0.25, 0.25), uniform(rng, 0.9, 1.1), gridCenter);
                warp = {sim.linear, sim.translation + Eigen::Vector2d(uniform(rng, -5, 5), uniform(rng, -5, 5))};
                start = to_px(warp(to_grid(handlePx)));
                end = to_px(warp(to_grid(trackEnd)));
                if (in_image(start.x(), start.y(), size, size) && in_image(end.x(), end.y(), size, size)) break;
                if (attempt > 100) throw Error(ErrorCode::InvalidArgument, "cannot place a warped demonstration");
            }
        }
        const DenseFeatureMap features =
            i == 0 ? sceneFeatures
                   : make_coordinate_features(spec.grid, spec.grid, spec.channels, warp, featureSeed, size, size).target;
        const AffineWarp inv = warp.inverse();
        PixelMask mask(size, size);
        for (int v = 0; v < size; ++v) {
            for (int u = 0; u < size; ++u) {
                const Eigen::Vector2d src = to_px(inv(to_grid(Eigen::Vector2d(u, v))));
                mask(u, v) = objectMask.contains(src.x(), src.y());
            }
        }

        EntryMeta meta;
        meta.id = id;
        meta.imagePath = "images/demo.png";
        meta.task = pickTaskEntry ? "pick up the mug" : "open the drawer";
        meta.objectName = pickTaskEntry ? "mug" : "drawer";
        meta.taskEmbedding = pickTaskEntry ? pickTask : openTask;
        if (i == 0) {
            meta.imageEmbedding = sceneEmbedding;
        } else if (pickTaskEntry || offTopic) {
            meta.imageEmbedding = random_embedding(dim, EmbeddingKind::Image, spec.seed + 1000 + i);
        } else {
            meta.imageEmbedding = embedding_near(sceneEmbedding, 0.95, spec.seed + 1000 + i);
        }
        meta.imageEmbedding.kind = EmbeddingKind::Image;
        meta.featureMapPath = fs::path("assets") / (std::string(id) + ".dfm");
        meta.maskPath = fs::path("assets") / (std::string(id) + ".msk");
        save_feature_map(features, memory.resolve(meta.featureMapPath));
        save_mask(mask, memory.resolve(*meta.maskPath));
        memory.add(ingest_custom(start, end, 8, size, size, meta));
    }
    save_memory(memory, dir / "memory" / "memory.json");

    std::vector<GraspCandidate> grasps;
    Rng grng(spec.seed * 131 + 5);
    for (int g = 0; g < 16; ++g) {
        Eigen::Vector4d q(standard_normal(grng), standard_normal(grng), standard_normal(grng), standard_normal(grng));
        q.normalize();
        const Eigen::Vector3d offset(uniform(grng, -0.08, 0.08), uniform(grng, -0.08, 0.08), uniform(grng, -0.08, 0.08));
        grasps.push_back({handle + offset, Eigen::Quaterniond(q[0], q[1], q[2], q[3]), uniform01(grng)});
    }
    json grasp = json::array();
    for (const auto& g : grasps) grasp.push_back(to_json(g));
    write_file_atomic(dir / "grasps.json", grasp.dump(2) + "\n");

    json truth{{"entry_id", "demo-000"},
               {"handle", vec_json(handle)},
               {"normal", vec_json(outward.vector())},
               {"contact_pixel", vec_json(handlePx)},
               {"direction2d", vec_json(tau.vector())}};
    write_file_atomic(dir / "truth.json", truth.dump(2) + "\n");
    return truth;
}

}  // namespace ram
