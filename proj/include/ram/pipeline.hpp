#pragma once

// Scene bundles, stage composition and JSON views of the pipeline results.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ram/config.hpp"
#include "ram/image.hpp"
#include "ram/lift.hpp"
#include "ram/memory.hpp"
#include "ram/retrieval.hpp"
#include "ram/transfer.hpp"

namespace ram {

/// File locations of one target observation. `scene.json` stores these
/// paths relative to its own directory; the image is optional.
struct SceneBundle {
    std::optional<std::filesystem::path> image;
    std::filesystem::path depth;       ///< .dpt
    std::filesystem::path intrinsics;  ///< JSON {fx, fy, cx, cy, width, height}
    std::optional<std::filesystem::path> mask;  ///< .msk
    std::filesystem::path embedding;   ///< .emb, image embedding
    std::filesystem::path features;    ///< .dfm
};

SceneBundle load_scene_bundle(const std::filesystem::path& sceneJson);
void save_scene_bundle(const SceneBundle& bundle, const std::filesystem::path& sceneJson);

struct Scene {
    std::optional<RgbImage> image;
    DepthImage depth;
    CameraIntrinsics intrinsics;
    std::optional<PixelMask> mask;
    Embedding imageEmbedding;
    DenseFeatureMap features;  ///< normalized on load
};

/// Loads and cross-checks every file of the bundle (DimensionMismatch when
/// sizes disagree).
Scene load_scene(const SceneBundle& bundle);

RetrievalQuery make_query(const Scene& scene, const Embedding& instruction, const Embedding& objectName,
                          const PipelineConfig& config);

Affordance2D run_transfer(const Scene& scene, const AffordanceMemory& memory, const AffordanceEntry& entry,
                          const PipelineConfig& config);

Affordance3D run_lift(const Scene& scene, const Affordance2D& affordance, const PipelineConfig& config);

struct InferResult {
    RetrievalResult retrieval;
    Affordance2D affordance2d;
    Affordance3D affordance3d;
    std::optional<GraspCandidate> grasp;
    std::optional<GraspChoice> graspChoice;
};

/// retrieve -> transfer -> lift (-> grasp selection when candidates are
/// given). Errors carry the stage: "task"/"semantic"/"geometric",
/// "transfer", "lift:*" or "grasp".
InferResult run_infer(const Scene& scene, const AffordanceMemory& memory, const Embedding& instruction,
                      const Embedding& objectName, const PipelineConfig& config,
                      const std::vector<GraspCandidate>* grasps = nullptr);

// JSON views ---------------------------------------------------------------

nlohmann::json to_json(const CameraIntrinsics& K);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
CameraIntrinsics load_intrinsics(const std::filesystem::path& path);

nlohmann::json to_json(const Affordance2D& a);
Affordance2D affordance2d_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Affordance3D& a);

nlohmann::json to_json(const GraspCandidate& g);
std::vector<GraspCandidate> grasps_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RetrievalResult& r, const RetrievalParams& params);

nlohmann::json infer_json(const InferResult& result);

// Fixtures -----------------------------------------------------------------

struct FixtureSpec {
    int entries = 20;
    int grid = 64;
    int channels = 32;
    int imageSize = 256;
    std::uint64_t seed = 7;
};

/// Writes a self-contained demo: a drawer-front target scene (scene.json and
/// its assets, instruction/object embeddings, grasps.json) and a memory under
/// memory/ holding one exact demonstration of the scene plus warped and
/// distractor entries. Returns the ground truth as JSON (also written to
/// truth.json).
nlohmann::json write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec);

}  // namespace ram
