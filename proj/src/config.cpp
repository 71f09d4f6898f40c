#include "ram/config.hpp"

#include <fstream>
#include <set>

namespace ram {
using json = nlohmann::json;

void PipelineConfig::validate() const {
    auto require = [](bool ok, const char* field) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, std::string("config value out of range: ") + field);
    };
    require(retrieval.taskTopK >= 1, "retrieval.task_top_k");
    require(retrieval.semanticThreshold >= -1.0 && retrieval.semanticThreshold <= 1.0, "retrieval.semantic_threshold");
    require(retrieval.taskWarnDistance >= 0.0, "retrieval.task_warn_distance");
    require(transfer.ransacIterations >= 1, "transfer.ransac_iterations");
    require(transfer.inlierTolerance > 0.0, "transfer.inlier_tolerance_px");
    require(transfer.scoreFloor >= -1.0 && transfer.scoreFloor <= 1.0, "transfer.score_floor");
    require(lift.cropRadius > 0.0, "lift.crop_radius");
    require(lift.kNeighbors >= 3, "lift.k_neighbors");
    require(lift.kClusters >= 1, "lift.k_clusters");
    require(lift.deltaProj > 0.0, "lift.delta_proj");
    require(lift.holeWindow >= 1, "lift.hole_window");
    require(robotIngest.maxPostContactSteps >= 1, "ingest.max_post_contact_steps");
    require(robotIngest.stopEpsilon >= 0.0, "ingest.stop_epsilon");
    require(robotIngest.stopSteps >= 1, "ingest.stop_steps");
    require(customPoints >= 2, "ingest.custom_points");
}

json to_json(const PipelineConfig& c) {
    return json{
        {"retrieval",
         {{"task_top_k", c.retrieval.taskTopK},
          {"semantic_threshold", c.retrieval.semanticThreshold},
          {"task_warn_distance", c.retrieval.taskWarnDistance},
          {"fallback_tasks", c.fallbackTasks}}},
        {"transfer",
         {{"ransac_iterations", c.transfer.ransacIterations},
          {"inlier_tolerance_px", c.transfer.inlierTolerance},
          {"score_floor", c.transfer.scoreFloor},
          {"seed", c.transfer.seed},
          {"masked_correspondence", c.maskedCorrespondence}}},
        {"lift",
         {{"crop_radius", c.lift.cropRadius},
          {"k_neighbors", c.lift.kNeighbors},
          {"k_clusters", c.lift.kClusters},
          {"delta_proj", c.lift.deltaProj},
          {"hole_window", c.lift.holeWindow},
          {"seed", c.liftSeed}}},
        {"ingest",
         {{"max_post_contact_steps", c.robotIngest.maxPostContactSteps},
          {"stop_epsilon", c.robotIngest.stopEpsilon},
          {"stop_steps", c.robotIngest.stopSteps},
          {"custom_points", c.customPoints}}},
    };
}

namespace {

class Section {
public:
    Section(const json& root, const char* name) : name_(name) {
        if (!root.contains(name)) return;
        node_ = &root.at(name);
        if (!node_->is_object()) throw Error(ErrorCode::InvalidArgument, std::string("config section '") + name + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (node_ && node_->contains(key)) out = node_->at(key).get<T>();
    }

    void finish() const {
        if (!node_) return;
        for (const auto& [key, value] : node_->items()) {
            if (!seen_.count(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + name_ + "." + key + "'");
        }
    }

private:
    std::string name_;
    const json* node_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

PipelineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "retrieval" && key != "transfer" && key != "lift" && key != "ingest") {
            throw Error(ErrorCode::InvalidArgument, "unknown config section '" + key + "'");
        }
    }
    PipelineConfig c;
    try {
        Section r(j, "retrieval");
        r.read("task_top_k", c.retrieval.taskTopK);
        r.read("semantic_threshold", c.retrieval.semanticThreshold);
        r.read("task_warn_distance", c.retrieval.taskWarnDistance);
        r.read("fallback_tasks", c.fallbackTasks);
        r.finish();

        Section t(j, "transfer");
        t.read("ransac_iterations", c.transfer.ransacIterations);
        t.read("inlier_tolerance_px", c.transfer.inlierTolerance);
        t.read("score_floor", c.transfer.scoreFloor);
        t.read("seed", c.transfer.seed);
        t.read("masked_correspondence", c.maskedCorrespondence);
        t.finish();

        Section l(j, "lift");
        l.read("crop_radius", c.lift.cropRadius);
        l.read("k_neighbors", c.lift.kNeighbors);
        l.read("k_clusters", c.lift.kClusters);
        l.read("delta_proj", c.lift.deltaProj);
        l.read("hole_window", c.lift.holeWindow);
        l.read("seed", c.liftSeed);
        l.finish();

        Section i(j, "ingest");
        i.read("max_post_contact_steps", c.robotIngest.maxPostContactSteps);
        i.read("stop_epsilon", c.robotIngest.stopEpsilon);
        i.read("stop_steps", c.robotIngest.stopSteps);
        i.read("custom_points", c.customPoints);
        i.finish();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string(), path.string());
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what(), path.string());
    }
}

}  // namespace ram
