#include "ram/memory.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ram/formats.hpp"

namespace ram {
namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(DemoSource source) {
    switch (source) {
        case DemoSource::Robotic: return "robotic";
        case DemoSource::Hoi: return "hoi";
        case DemoSource::Custom: return "custom";
    }
    return "custom";
}

DemoSource demo_source_from_string(std::string_view name) {
    if (name == "robotic") return DemoSource::Robotic;
    if (name == "hoi") return DemoSource::Hoi;
    if (name == "custom") return DemoSource::Custom;
    throw Error(ErrorCode::InvalidArgument, "unknown demonstration source '" + std::string(name) + "'");
}

Waypoints AffordanceEntry::adjusted_waypoints() const {
    Waypoints out = waypoints;
    for (auto& w : out) w += offset;
    return out;
}

void AffordanceMemory::add(AffordanceEntry entry) {
    const bool duplicate =
        std::any_of(entries_.begin(), entries_.end(), [&](const AffordanceEntry& e) { return e.id == entry.id; });
    if (duplicate) throw Error(ErrorCode::DuplicateId, "duplicate entry id '" + entry.id + "'");
    taskIndex_[entry.task].push_back(entry.id);
    entries_.push_back(std::move(entry));
}

const AffordanceEntry& AffordanceMemory::entry(const std::string& id) const {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const AffordanceEntry& e) { return e.id == id; });
    if (it == entries_.end()) throw Error(ErrorCode::InvalidArgument, "no entry with id '" + id + "'");
    return *it;
}

namespace {

AffordanceEntry entry_from_meta(const EntryMeta& meta, DemoSource source, int width, int height, Waypoints waypoints) {
    AffordanceEntry e;
    e.id = meta.id;
    e.source = source;
    e.imagePath = meta.imagePath;
    e.imageWidth = width;
    e.imageHeight = height;
    e.task = meta.task;
    e.objectName = meta.objectName;
    e.waypoints = std::move(waypoints);
    e.taskEmbedding = meta.taskEmbedding;
    e.imageEmbedding = meta.imageEmbedding;
    e.featureMapPath = meta.featureMapPath;
    e.maskPath = meta.maskPath;
    validate_entry(e);
    return e;
}

Eigen::Vector2d mean_of(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (const auto& p : pts) m += p;
    return m / static_cast<double>(pts.size());
}

}  // namespace

AffordanceEntry ingest_robotic(const RobotTrajectory& trajectory, const CameraIntrinsics& K,
                               const Eigen::Isometry3d& cameraFromWorld, const EntryMeta& meta,
                               const RobotIngestParams& params) {
    K.validate();
    const std::size_t n = trajectory.positions.size();
    if (trajectory.gripperClosed.size() != n || trajectory.timestamps.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "trajectory streams are not time-aligned");
    }
    if (!std::is_sorted(trajectory.timestamps.begin(), trajectory.timestamps.end())) {
        throw Error(ErrorCode::InvalidArgument, "trajectory timestamps are not ordered");
    }
    const auto closed = std::find(trajectory.gripperClosed.begin(), trajectory.gripperClosed.end(), true);
    if (closed == trajectory.gripperClosed.end()) {
        throw Error(ErrorCode::NoContactEvent, "the gripper never closes in this trajectory");
    }
    const std::size_t contact = static_cast<std::size_t>(closed - trajectory.gripperClosed.begin());

    auto to_image = [&](std::size_t i) -> std::optional<Eigen::Vector2d> {
        const Eigen::Vector3d pc = cameraFromWorld * trajectory.positions[i];
        if (!(pc.z() > 0.0)) return std::nullopt;
        const Eigen::Vector2d uv = project(pc, K);
        if (!in_image(uv.x(), uv.y(), K.width, K.height)) return std::nullopt;
        return uv;
    };

    const auto c = to_image(contact);
    if (!c) throw Error(ErrorCode::ProjectionOutOfImage, "contact point projects outside the first frame");

    Waypoints waypoints{*c};
    int still = 0;
    for (int step = 1; step <= params.maxPostContactSteps && contact + step < n; ++step) {
        const std::size_t i = contact + static_cast<std::size_t>(step);
        const auto uv = to_image(i);
        if (!uv) break;
        waypoints.push_back(*uv);
        const double moved = (trajectory.positions[i] - trajectory.positions[i - 1]).norm();
        still = moved < params.stopEpsilon ? still + 1 : 0;
        if (still == params.stopSteps) {
            waypoints.resize(waypoints.size() - static_cast<std::size_t>(params.stopSteps));
            break;
        }
    }
    if (waypoints.size() < 2) {
        throw Error(ErrorCode::InsufficientWaypoints, "the end-effector does not move after contact");
    }
    return entry_from_meta(meta, DemoSource::Robotic, K.width, K.height, std::move(waypoints));
}

AffordanceEntry ingest_hoi(const std::vector<std::vector<Eigen::Vector2d>>& frames, const PixelMask& objectMask,
                           const EntryMeta& meta) {
    std::vector<const std::vector<Eigen::Vector2d>*> used;
    for (const auto& f : frames)
        if (!f.empty()) used.push_back(&f);
    if (used.empty()) throw Error(ErrorCode::InsufficientWaypoints, "no frame carries hand keypoints");

    std::vector<Eigen::Vector2d> inMask;
    for (const auto& p : *used.front())
        if (objectMask.contains(p.x(), p.y())) inMask.push_back(p);
    if (inMask.empty()) throw Error(ErrorCode::NoContactInMask, "no first-frame keypoint lies inside the object mask");

    const Eigen::Vector2d contact = mean_of(inMask);
    const Eigen::Vector2d shift = contact - mean_of(*used.front());
    Waypoints waypoints;
    for (const auto* f : used) waypoints.push_back(mean_of(*f) + shift);
    if (waypoints.size() < 2) {
        throw Error(ErrorCode::InsufficientWaypoints, "a hand track needs keypoints in at least two frames");
    }
    return entry_from_meta(meta, DemoSource::Hoi, objectMask.width(), objectMask.height(), std::move(waypoints));
}

AffordanceEntry ingest_custom(const Eigen::Vector2d& start, const Eigen::Vector2d& end, int nPoints, int imageWidth,
                              int imageHeight, const EntryMeta& meta) {
    if (start == end) throw Error(ErrorCode::DegenerateAnnotation, "start and end points coincide");
    if (nPoints < 2) throw Error(ErrorCode::InvalidArgument, "custom annotation needs at least two points");
    if (!in_image(start.x(), start.y(), imageWidth, imageHeight) || !in_image(end.x(), end.y(), imageWidth, imageHeight)) {
        throw Error(ErrorCode::OutOfBounds, "annotation endpoint outside the image");
    }
    Waypoints waypoints;
    waypoints.reserve(static_cast<std::size_t>(nPoints));
    for (int i = 0; i < nPoints; ++i) {
        const double t = static_cast<double>(i) / (nPoints - 1);
        waypoints.push_back(i == nPoints - 1 ? end : Eigen::Vector2d(start + t * (end - start)));
    }
    return entry_from_meta(meta, DemoSource::Custom, imageWidth, imageHeight, std::move(waypoints));
}

void validate_entry(const AffordanceEntry& e, const fs::path* root) {
    if (e.id.empty()) throw Error(ErrorCode::ManifestParseError, "entry without id");
    if (e.task.empty()) throw Error(ErrorCode::ManifestParseError, "entry '" + e.id + "' has no task");
    if (e.waypoints.size() < 2) {
        throw Error(ErrorCode::InsufficientWaypoints, "entry '" + e.id + "' needs at least two waypoints");
    }
    if (e.imageWidth <= 0 || e.imageHeight <= 0) {
        throw Error(ErrorCode::ManifestParseError, "entry '" + e.id + "' has no image size");
    }
    for (const auto& w : e.adjusted_waypoints()) {
        if (!in_image(w.x(), w.y(), e.imageWidth, e.imageHeight)) {
            throw Error(ErrorCode::OutOfBounds, "entry '" + e.id + "' has a waypoint outside its image");
        }
    }
    for (const Embedding* emb : {&e.taskEmbedding, &e.imageEmbedding}) {
        if (emb->values.size() == 0 || !emb->values.allFinite() || emb->values.isZero(0.0)) {
            throw Error(ErrorCode::ZeroVector, "entry '" + e.id + "' has an empty or zero embedding");
        }
    }
    if (!root) return;
    std::vector<fs::path> assets{e.imagePath, e.featureMapPath};
    if (e.maskPath) assets.push_back(*e.maskPath);
    for (const auto& rel : assets) {
        const fs::path p = rel.is_absolute() ? rel : *root / rel;
        if (!fs::exists(p)) {
            throw Error(ErrorCode::MissingAsset, "entry '" + e.id + "' references missing file " + p.string(), p.string());
        }
    }
}

namespace {

json vec_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

json embedding_json(const Embedding& e) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < e.values.size(); ++i) arr.push_back(e.values[i]);
    return arr;
}

Embedding embedding_from(const json& j, EmbeddingKind kind) {
    Embedding e;
    e.kind = kind;
    e.values.resize(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) e.values[static_cast<Eigen::Index>(i)] = j.at(i).get<float>();
    return e;
}

Eigen::Vector2d vec2_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw json::type_error::create(302, "expected a pair of numbers", &j);
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json entry_json(const AffordanceEntry& e) {
    json j;
    j["id"] = e.id;
    j["source"] = to_string(e.source);
    j["image"] = e.imagePath.generic_string();
    j["image_size"] = json::array({e.imageWidth, e.imageHeight});
    j["task"] = e.task;
    j["object"] = e.objectName;
    json wps = json::array();
    for (const auto& w : e.waypoints) wps.push_back(vec_json(w));
    j["waypoints"] = std::move(wps);
    j["offset"] = vec_json(e.offset);
    j["task_embedding"] = embedding_json(e.taskEmbedding);
    j["image_embedding"] = embedding_json(e.imageEmbedding);
    j["feature_map"] = e.featureMapPath.generic_string();
    if (e.maskPath) j["mask"] = e.maskPath->generic_string();
    return j;
}

AffordanceEntry entry_from(const json& j) {
    AffordanceEntry e;
    e.id = j.at("id").get<std::string>();
    e.source = demo_source_from_string(j.at("source").get<std::string>());
    e.imagePath = j.at("image").get<std::string>();
    const auto& size = j.at("image_size");
    e.imageWidth = size.at(0).get<int>();
    e.imageHeight = size.at(1).get<int>();
    e.task = j.at("task").get<std::string>();
    e.objectName = j.at("object").get<std::string>();
    for (const auto& w : j.at("waypoints")) e.waypoints.push_back(vec2_from(w));
    if (j.contains("offset")) e.offset = vec2_from(j.at("offset"));
    e.taskEmbedding = embedding_from(j.at("task_embedding"), EmbeddingKind::Text);
    e.imageEmbedding = embedding_from(j.at("image_embedding"), EmbeddingKind::Image);
    e.featureMapPath = j.at("feature_map").get<std::string>();
    if (j.contains("mask") && !j.at("mask").is_null()) e.maskPath = fs::path(j.at("mask").get<std::string>());
    return e;
}

}  // namespace

std::string manifest_json(const AffordanceMemory& memory) {
    json entries = json::array();
    for (const auto& e : memory.entries()) entries.push_back(entry_json(e));
    json doc{{"version", 1}, {"entries", std::move(entries)}};
    return doc.dump(2) + "\n";
}

void save_memory(const AffordanceMemory& memory, const fs::path& manifestPath) {
    write_file_atomic(manifestPath, manifest_json(memory));
}

AffordanceMemory load_memory(const fs::path& manifestPath) {
    std::ifstream in(manifestPath);
    if (!in) {
        throw Error(ErrorCode::MissingAsset, "cannot open manifest " + manifestPath.string(), manifestPath.string());
    }
    const fs::path root = manifestPath.parent_path();
    AffordanceMemory memory(root);
    try {
        const json doc = json::parse(in);
        if (doc.at("version").get<int>() != 1) {
            throw Error(ErrorCode::ManifestParseError, "unsupported manifest version", manifestPath.string());
        }
        for (const auto& j : doc.at("entries")) {
            AffordanceEntry e = entry_from(j);
            validate_entry(e, &root);
            memory.add(std::move(e));
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ManifestParseError, manifestPath.string() + ": " + ex.what(), manifestPath.string());
    }
    return memory;
}

EntryAssets load_assets(const AffordanceMemory& memory, const AffordanceEntry& entry) {
    EntryAssets assets;
    DenseFeatureMap map = load_feature_map(memory.resolve(entry.featureMapPath));
    map.validate();
    if (map.imageWidth != entry.imageWidth || map.imageHeight != entry.imageHeight) {
        throw Error(ErrorCode::DimensionMismatch, "feature map of entry '" + entry.id + "' covers a different image size");
    }
    assets.features = map.normalized ? std::move(map) : normalize_features(map);
    if (entry.maskPath) {
        PixelMask mask = load_mask(memory.resolve(*entry.maskPath));
        if (mask.width() != entry.imageWidth || mask.height() != entry.imageHeight) {
            throw Error(ErrorCode::DimensionMismatch, "mask of entry '" + entry.id + "' has a different image size");
        }
        assets.mask = std::move(mask);
    }
    return assets;
}

}  // namespace ram
