// ram: batch command-line front end for the affordance pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ram/config.hpp"
#include "ram/formats.hpp"
#include "ram/image.hpp"
#include "ram/pipeline.hpp"
#include "ram/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRetrieval = 3;
constexpr int kExitTransfer = 4;
constexpr int kExitLift = 5;
constexpr int kExitUsage = 64;

int exit_code_for(const ram::Error& e) {
    const std::string& s = e.stage();
    if (s == "task" || s == "semantic" || s == "geometric" || s == "retrieval") return kExitRetrieval;
    if (s == "transfer") return kExitTransfer;
    if (s.rfind("lift", 0) == 0 || s == "grasp") return kExitLift;
    return kExitValidation;
}

void report(const ram::Error& e) {
    json j{{"error", std::string(ram::to_string(e.code()))}, {"message", e.what()}};
    j["stage"] = e.stage().empty() ? json(nullptr) : json(e.stage());
    j["path"] = e.path().empty() ? json(nullptr) : json(e.path());
    std::cerr << j.dump() << "\n";
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ram::Error(ram::ErrorCode::IoError, "cannot open " + p.string(), p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ram::Error(ram::ErrorCode::InvalidArgument, p.string() + ": " + e.what(), p.string());
    }
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw ram::Error(ram::ErrorCode::MissingAsset, "missing file " + p.string(), p.string());
}

void emit(const json& j, const std::string& out) {
    const std::string text = j.dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        ram::write_file_atomic(out, text);
    }
}

Eigen::Vector2d vec2(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

struct Common {
    std::string config;
    ram::PipelineConfig load() const { return config.empty() ? ram::PipelineConfig{} : ram::load_config(config); }
};

ram::AffordanceMemory open_memory(const fs::path& dir) {
    const fs::path manifest = dir / "memory.json";
    if (!fs::exists(manifest)) throw ram::Error(ram::ErrorCode::MissingAsset, "no memory manifest at " + manifest.string(), manifest.string());
    return ram::load_memory(manifest);
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string kind;
    std::string memory;
    std::string id;
    std::string image;
    std::string task;
    std::string object;
    std::string taskEmbedding;
    std::string imageEmbedding;
    std::string features;
    std::string mask;
    std::vector<double> start;
    std::vector<double> end;
    int points = 0;
    std::string trajectory;
    std::string intrinsics;
    std::string keypoints;
};

fs::path relative_to(const fs::path& p, const fs::path& root) {
    const fs::path abs = fs::absolute(p).lexically_normal();
    const fs::path rel = abs.lexically_relative(fs::absolute(root).lexically_normal());
    return rel.empty() ? abs : rel;
}

int cmd_ingest(const IngestArgs& a, const Common& common) {
    const ram::PipelineConfig config = common.load();
    const fs::path dir = a.memory;
    const fs::path manifest = dir / "memory.json";
    ram::AffordanceMemory memory = fs::exists(manifest) ? ram::load_memory(manifest) : ram::AffordanceMemory(dir);
    // Relative asset paths such as ../x only resolve once the directory exists.
    fs::create_directories(dir);

    for (const auto& p : {a.image, a.taskEmbedding, a.imageEmbedding, a.features}) require_file(p);
    if (!a.mask.empty()) require_file(a.mask);

    ram::EntryMeta meta;
    meta.id = a.id;
    meta.imagePath = relative_to(a.image, dir);
    meta.task = a.task;
    meta.objectName = a.object;
    meta.taskEmbedding = ram::load_embedding(a.taskEmbedding);
    meta.imageEmbedding = ram::load_embedding(a.imageEmbedding);
    meta.featureMapPath = relative_to(a.features, dir);
    if (!a.mask.empty()) meta.maskPath = relative_to(a.mask, dir);
    const ram::RgbImage image = ram::read_png(a.image);

    ram::AffordanceEntry entry;
    if (a.kind == "custom") {
        if (a.start.size() != 2 || a.end.size() != 2) {
            throw ram::Error(ram::ErrorCode::InvalidArgument, "custom ingestion needs --start u,v and --end u,v");
        }
        const int n = a.points > 0 ? a.points : config.customPoints;
        entry = ram::ingest_custom(vec2(a.start), vec2(a.end), n, image.width, image.height, meta);
    } else if (a.kind == "robotic") {
        require_file(a.trajectory);
        require_file(a.intrinsics);
        const json t = read_json(a.trajectory);
        ram::RobotTrajectory traj;
        Eigen::Isometry3d cameraFromWorld = Eigen::Isometry3d::Identity();
        try {
            traj.timestamps = t.at("timestamps").get<std::vector<double>>();
            for (const auto& p : t.at("positions")) traj.positions.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
            traj.gripperClosed = t.at("gripper_closed").get<std::vector<bool>>();
            if (t.contains("camera_from_world")) {
                const auto& m = t.at("camera_from_world");
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c) cameraFromWorld.matrix()(r, c) = m.at(r).at(c).get<double>();
            }
        } catch (const json::exception& e) {
            throw ram::Error(ram::ErrorCode::InvalidArgument, a.trajectory + ": " + e.what(), a.trajectory);
        }
        const ram::CameraIntrinsics K = ram::load_intrinsics(a.intrinsics);
        entry = ram::ingest_robotic(traj, K, cameraFromWorld, meta, config.robotIngest);
    } else {
        require_file(a.keypoints);
        if (a.mask.empty()) throw ram::Error(ram::ErrorCode::InvalidArgument, "hoi ingestion needs --mask (object mask)");
        const json k = read_json(a.keypoints);
        std::vector<std::vector<Eigen::Vector2d>> frames;
        try {
            for (const auto& f : k) {
                auto& frame = frames.emplace_back();
                for (const auto& p : f) frame.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            }
        } catch (const json::exception& e) {
            throw ram::Error(ram::ErrorCode::InvalidArgument, a.keypoints + ": " + e.what(), a.keypoints);
        }
        entry = ram::ingest_hoi(frames, ram::load_mask(a.mask), meta);
    }
    ram::validate_entry(entry, &memory.root());
    ram::load_assets(memory, entry);
    memory.add(entry);
    ram::save_memory(memory, manifest);
    std::cout << json{{"id", entry.id}, {"entries", memory.entries().size()}}.dump() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct QueryArgs {
    std::string scene;
    std::string memory;
    std::string instruction;
    std::string object;
};

int cmd_retrieve(const QueryArgs& a, const std::string& out, const Common& common) {
    const ram::PipelineConfig config = common.load();
    const ram::Scene scene = ram::load_scene(ram::load_scene_bundle(a.scene));
    const ram::AffordanceMemory memory = open_memory(a.memory);
    const auto query = ram::make_query(scene, ram::load_embedding(a.instruction), ram::load_embedding(a.object), config);
    ram::RetrievalResult r;
    try {
        r = ram::retrieve(query, memory, config.retrieval);
    } catch (const ram::Error& e) {
        throw e.stage().empty() ? e.with_stage("retrieval") : e;
    }
    emit(ram::to_json(r, config.retrieval), out);
    return kExitOk;
}

int cmd_transfer(const std::string& scenePath, const std::string& memoryDir, const std::string& entryId,
                 const std::string& out, const Common& common) {
    const ram::PipelineConfig config = common.load();
    const ram::Scene scene = ram::load_scene(ram::load_scene_bundle(scenePath));
    const ram::AffordanceMemory memory = open_memory(memoryDir);
    const ram::AffordanceEntry& entry = memory.entry(entryId);
    emit(ram::to_json(ram::run_transfer(scene, memory, entry, config)), out);
    return kExitOk;
}

int cmd_lift(const std::string& scenePath, const std::string& affordance, const std::string& grasps,
             const std::string& out, const Common& common) {
    const ram::PipelineConfig config = common.load();
    const ram::Scene scene = ram::load_scene(ram::load_scene_bundle(scenePath));
    const ram::Affordance2D a2d = ram::affordance2d_from_json(read_json(affordance));
    const ram::Affordance3D a3d = ram::run_lift(scene, a2d, config);
    json j = ram::to_json(a3d);
    if (!grasps.empty()) {
        const auto candidates = ram::grasps_from_json(read_json(grasps));
        ram::GraspChoice choice;
        try {
            choice = ram::select_grasp(candidates, a3d.contact);
        } catch (const ram::Error& e) {
            throw e.with_stage("grasp");
        }
        j["grasp"] = ram::to_json(candidates[choice.index]);
        j["grasp"]["index"] = choice.index;
        j["grasp"]["distance"] = choice.distance;
    }
    emit(j, out);
    return kExitOk;
}

int cmd_infer(const QueryArgs& a, const std::string& grasps, const std::string& outDir, const Common& common) {
    const ram::PipelineConfig config = common.load();
    const ram::Scene scene = ram::load_scene(ram::load_scene_bundle(a.scene));
    const ram::AffordanceMemory memory = open_memory(a.memory);
    std::optional<std::vector<ram::GraspCandidate>> candidates;
    if (!grasps.empty()) candidates = ram::grasps_from_json(read_json(grasps));
    const ram::Embedding instruction = ram::load_embedding(a.instruction);
    const ram::Embedding object = ram::load_embedding(a.object);

    const ram::InferResult r = ram::run_infer(scene, memory, instruction, object, config, candidates ? &*candidates : nullptr);

    fs::create_directories(outDir);
    const json affordance = ram::infer_json(r);
    ram::write_file_atomic(fs::path(outDir) / "affordance.json", affordance.dump(2) + "\n");
    ram::write_file_atomic(fs::path(outDir) / "retrieval.json", ram::to_json(r.retrieval, config.retrieval).dump(2) + "\n");
    const ram::RgbImage base = scene.image ? *scene.image : ram::render_depth(scene.depth);
    ram::write_png(ram::render_overlay(base, r.affordance2d), fs::path(outDir) / "overlay.png");
    std::cout << affordance.dump(2) << "\n";
    return kExitOk;
}

int cmd_visualize(const std::string& image, const std::string& affordance, const std::string& out) {
    const ram::Affordance2D a2d = ram::affordance2d_from_json(read_json(affordance));
    ram::write_png(ram::render_overlay(ram::read_png(image), a2d), out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::uint64_t seed = 0;
    double noise = 0.0;
    int width = 128;
    int height = 96;
    double focal = 120.0;
    std::vector<double> normal{0.0, 0.0, -1.0};
    double distance = 1.0;
    std::string layout = "drawer";
    int grid = 32;
    int channels = 16;
    std::vector<double> warp{1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    ram::FixtureSpec fixture;
};

ram::CameraIntrinsics synth_intrinsics(const SynthArgs& a) {
    ram::CameraIntrinsics K{a.focal, a.focal, (a.width - 1) / 2.0, (a.height - 1) / 2.0, a.width, a.height};
    K.validate();
    return K;
}

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

void write_scene(const ram::SyntheticScene& s, const fs::path& dir) {
    fs::create_directories(dir);
    ram::save_depth(s.depth, dir / "depth.dpt");
    ram::write_file_atomic(dir / "intrinsics.json", ram::to_json(s.intrinsics).dump(2) + "\n");
    ram::PixelMask valid(s.depth.height(), s.depth.width());
    for (int v = 0; v < s.depth.height(); ++v)
        for (int u = 0; u < s.depth.width(); ++u) valid(u, v) = s.depth.valid(u, v);
    ram::save_mask(valid, dir / "mask.msk");
    json truth{{"points", json::object()}, {"directions", json::object()}};
    for (const auto& [name, p] : s.points) truth["points"][name] = vec_json(p);
    for (const auto& [name, d] : s.directions) truth["directions"][name] = vec_json(d);
    for (const auto& [name, m] : s.faceMasks) {
        if (m.count() == 0) continue;
        std::string file = name;
        file[0] = file[0] == '+' ? 'p' : 'n';
        ram::save_mask(m, dir / ("face_" + file + ".msk"));
    }
    ram::write_file_atomic(dir / "truth.json", truth.dump(2) + "\n");
    ram::write_png(ram::render_depth(s.depth), dir / "depth.png");
}

int cmd_synth(const std::string& kind, const SynthArgs& a) {
    const fs::path dir = a.out;
    if (kind == "plane") {
        if (a.normal.size() != 3) throw ram::Error(ram::ErrorCode::InvalidArgument, "--normal needs three values");
        write_scene(ram::make_plane_scene({a.normal[0], a.normal[1], a.normal[2]}, a.distance, synth_intrinsics(a), a.noise, a.seed), dir);
    } else if (kind == "box") {
        const ram::BoxSpec spec = a.layout == "corner" ? ram::box_corner_spec(a.seed, a.noise) : ram::drawer_front_spec(a.seed, a.noise);
        write_scene(ram::make_box_scene(spec, synth_intrinsics(a), a.seed), dir);
    } else if (kind == "features") {
        if (a.warp.size() != 6) throw ram::Error(ram::ErrorCode::InvalidArgument, "--warp needs a,b,c,d,tx,ty");
        ram::AffineWarp w;
        w.linear << a.warp[0], a.warp[1], a.warp[2], a.warp[3];
        w.translation << a.warp[4], a.warp[5];
        const ram::FeaturePair pair = ram::make_coordinate_features(a.grid, a.grid, a.channels, w, a.seed);
        fs::create_directories(dir);
        ram::save_feature_map(pair.source, dir / "source.dfm");
        ram::save_feature_map(pair.target, dir / "target.dfm");
    } else {
        const json truth = ram::write_fixture(dir, a.fixture);
        std::cout << truth.dump(2) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ram: retrieve a demonstration, transfer its 2D affordance and lift it to 3D"};
    app.require_subcommand(1);
    Common common;

    // ingest
    IngestArgs ingest;
    auto* ingestCmd = app.add_subcommand("ingest", "Append a demonstration to a memory directory");
    ingestCmd->add_option("kind", ingest.kind, "robotic | hoi | custom")->required()->check(CLI::IsMember({"robotic", "hoi", "custom"}));
    ingestCmd->add_option("--memory", ingest.memory, "Memory directory (memory.json is created if absent)")->required();
    ingestCmd->add_option("--id", ingest.id, "Entry id")->required();
    ingestCmd->add_option("--image", ingest.image, "First-frame image (PNG)")->required();
    ingestCmd->add_option("--task", ingest.task, "Task label")->required();
    ingestCmd->add_option("--object", ingest.object, "Object name")->required();
    ingestCmd->add_option("--task-embedding", ingest.taskEmbedding, "Text embedding of the task (.emb)")->required();
    ingestCmd->add_option("--image-embedding", ingest.imageEmbedding, "Image embedding of the first frame (.emb)")->required();
    ingestCmd->add_option("--features", ingest.features, "Dense feature map of the first frame (.dfm)")->required();
    ingestCmd->add_option("--mask", ingest.mask, "Object mask (.msk); required for hoi");
    ingestCmd->add_option("--start", ingest.start, "custom: contact pixel u,v")->delimiter(',')->expected(2);
    ingestCmd->add_option("--end", ingest.end, "custom: end pixel u,v")->delimiter(',')->expected(2);
    ingestCmd->add_option("--points", ingest.points, "custom: number of waypoints (default from config)");
    ingestCmd->add_option("--trajectory", ingest.trajectory,
                          "robotic: JSON {timestamps, positions, gripper_closed, camera_from_world?}");
    ingestCmd->add_option("--intrinsics", ingest.intrinsics, "robotic: camera intrinsics JSON");
    ingestCmd->add_option("--keypoints", ingest.keypoints, "hoi: JSON list of frames, each a list of [u,v]");
    ingestCmd->add_option("--config", common.config, "Pipeline config JSON");

    // retrieve / infer share the query flags
    QueryArgs query;
    std::string out;
    auto add_query = [&](CLI::App* cmd) {
        cmd->add_option("--scene", query.scene, "scene.json bundle")->required();
        cmd->add_option("--memory", query.memory, "Memory directory")->required();
        cmd->add_option("--instruction", query.instruction, "Text embedding of the instruction's task (.emb)")->required();
        cmd->add_option("--object", query.object, "Text embedding of the object name (.emb)")->required();
        cmd->add_option("--config", common.config, "Pipeline config JSON");
    };
    auto* retrieveCmd = app.add_subcommand("retrieve", "Run the three retrieval stages and print the report");
    add_query(retrieveCmd);
    retrieveCmd->add_option("--out", out, "Write the report here instead of stdout");

    std::string scenePath;
    std::string memoryDir;
    std::string entryId;
    auto* transferCmd = app.add_subcommand("transfer", "Transfer one entry's waypoints into the scene");
    transferCmd->add_option("--scene", scenePath, "scene.json bundle")->required();
    transferCmd->add_option("--memory", memoryDir, "Memory directory")->required();
    transferCmd->add_option("--entry", entryId, "Entry id")->required();
    transferCmd->add_option("--out", out, "Write the 2D affordance here instead of stdout");
    transferCmd->add_option("--config", common.config, "Pipeline config JSON");

    std::string affordance;
    std::string grasps;
    auto* liftCmd = app.add_subcommand("lift", "Lift a 2D affordance to a 3D contact and direction");
    liftCmd->add_option("--scene", scenePath, "scene.json bundle")->required();
    liftCmd->add_option("--affordance", affordance, "2D affordance JSON")->required();
    liftCmd->add_option("--grasps", grasps, "Grasp candidates JSON; picks the one nearest the contact");
    liftCmd->add_option("--out", out, "Write the 3D affordance here instead of stdout");
    liftCmd->add_option("--config", common.config, "Pipeline config JSON");

    auto* inferCmd = app.add_subcommand("infer", "retrieve, transfer and lift in one run");
    add_query(inferCmd);
    inferCmd->add_option("--grasps", grasps, "Grasp candidates JSON");
    inferCmd->add_option("--out", out, "Output directory for affordance.json, retrieval.json, overlay.png")->required();

    std::string image;
    auto* visualizeCmd = app.add_subcommand("visualize", "Draw a 2D affordance over an image");
    visualizeCmd->add_option("--image", image, "Base image (PNG)")->required();
    visualizeCmd->add_option("--affordance", affordance, "2D affordance JSON")->required();
    visualizeCmd->add_option("--out", out, "Output PNG")->required();

    SynthArgs synth;
    std::string synthKind;
    auto* synthCmd = app.add_subcommand("synth", "Write synthetic scenes, feature maps or a full demo fixture");
    synthCmd->add_option("kind", synthKind, "plane | box | features | fixture")->required()->check(CLI::IsMember({"plane", "box", "features", "fixture"}));
    synthCmd->add_option("--out", synth.out, "Output directory")->required();
    synthCmd->add_option("--seed", synth.seed, "Seed");
    synthCmd->add_option("--noise", synth.noise, "plane/box: depth noise standard deviation (m)");
    synthCmd->add_option("--width", synth.width, "plane/box: image width");
    synthCmd->add_option("--height", synth.height, "plane/box: image height");
    synthCmd->add_option("--focal", synth.focal, "plane/box: focal length (px)");
    synthCmd->add_option("--normal", synth.normal, "plane: normal nx,ny,nz")->delimiter(',')->expected(3);
    synthCmd->add_option("--distance", synth.distance, "plane: offset d in n.p + d = 0");
    synthCmd->add_option("--layout", synth.layout, "box: drawer | corner")->check(CLI::IsMember({"drawer", "corner"}));
    synthCmd->add_option("--grid", synth.grid, "features: grid size");
    synthCmd->add_option("--channels", synth.channels, "features: channel count");
    synthCmd->add_option("--warp", synth.warp, "features: affine a,b,c,d,tx,ty on grid coordinates")->delimiter(',')->expected(6);
    synthCmd->add_option("--entries", synth.fixture.entries, "fixture: memory size");
    synthCmd->add_option("--fixture-grid", synth.fixture.grid, "fixture: feature grid size");
    synthCmd->add_option("--fixture-channels", synth.fixture.channels, "fixture: feature channels");
    synthCmd->add_option("--size", synth.fixture.imageSize, "fixture: image size");
    synthCmd->add_option("--fixture-seed", synth.fixture.seed, "fixture: seed");

    std::string configOut;
    auto* configCmd = app.add_subcommand("config", "Configuration helpers");
    configCmd->require_subcommand(1);
    auto* configInit = configCmd->add_subcommand("init", "Write the default configuration");
    configInit->add_option("--out", configOut, "Write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*ingestCmd) return cmd_ingest(ingest, common);
        if (*retrieveCmd) return cmd_retrieve(query, out, common);
        if (*transferCmd) return cmd_transfer(scenePath, memoryDir, entryId, out, common);
        if (*liftCmd) return cmd_lift(scenePath, affordance, grasps, out, common);
        if (*inferCmd) return cmd_infer(query, grasps, out, common);
        if (*visualizeCmd) return cmd_visualize(image, affordance, out);
        if (*synthCmd) return cmd_synth(synthKind, synth);
        if (*configInit) {
            emit(ram::to_json(ram::PipelineConfig{}), configOut);
            return kExitOk;
        }
    } catch (const ram::Error& e) {
        report(e);
        return exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        report(ram::Error(ram::ErrorCode::IoError, e.what(), e.path1().string()));
        return kExitValidation;
    }
    std::cerr << app.help();
    return kExitUsage;
}
