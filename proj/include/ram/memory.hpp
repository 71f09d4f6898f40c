#pragma once

// Affordance memory: demonstrations reduced to a first-frame image, a task
// label and an ordered list of 2D waypoints whose first element is the
// contact point. Entries come from robot rollouts, hand-object interaction
// clips or manual start/end annotation.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ram/features.hpp"
#include "ram/geometry.hpp"
#include "ram/mask.hpp"

namespace ram {

enum class DemoSource { Robotic, Hoi, Custom };

std::string_view to_string(DemoSource source);
DemoSource demo_source_from_string(std::string_view name);

using Waypoints = std::vector<Eigen::Vector2d>;

struct AffordanceEntry {
    std::string id;
    DemoSource source = DemoSource::Custom;
    std::filesystem::path imagePath;  ///< relative to the manifest directory
    int imageWidth = 0;
    int imageHeight = 0;
    std::string task;
    std::string objectName;
    Waypoints waypoints;  ///< as annotated, before the manual offset
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();  ///< manual refinement, pixels
    Embedding taskEmbedding;
    Embedding imageEmbedding;
    std::filesystem::path featureMapPath;
    std::optional<std::filesystem::path> maskPath;

    /// Waypoints with the manual offset applied; element 0 is the contact.
    Waypoints adjusted_waypoints() const;
    Eigen::Vector2d contact() const { return waypoints.front() + offset; }

    bool operator==(const AffordanceEntry&) const = default;
};

/// Fields of an entry that the ingestion procedures do not derive.
struct EntryMeta {
    std::string id;
    std::filesystem::path imagePath;
    std::string task;
    std::string objectName;
    Embedding taskEmbedding;
    Embedding imageEmbedding;
    std::filesystem::path featureMapPath;
    std::optional<std::filesystem::path> maskPath;
};

class AffordanceMemory {
public:
    AffordanceMemory() = default;
    explicit AffordanceMemory(std::filesystem::path root) : root_(std::move(root)) {}

    /// Throws DuplicateId.
    void add(AffordanceEntry entry);

    const std::vector<AffordanceEntry>& entries() const { return entries_; }
    const std::map<std::string, std::vector<std::string>>& task_index() const { return taskIndex_; }
    const AffordanceEntry& entry(const std::string& id) const;
    bool empty() const { return entries_.empty(); }

    /// Directory that relative asset paths are resolved against.
    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root_ / p; }

    bool operator==(const AffordanceMemory& o) const { return entries_ == o.entries_ && taskIndex_ == o.taskIndex_; }

private:
    std::filesystem::path root_;
    std::vector<AffordanceEntry> entries_;
    std::map<std::string, std::vector<std::string>> taskIndex_;
};

// ---------------------------------------------------------------------------
// Ingestion

/// Time-aligned robot rollout samples in the world frame.
struct RobotTrajectory {
    std::vector<double> timestamps;
    std::vector<Eigen::Vector3d> positions;
    std::vector<bool> gripperClosed;
};

struct RobotIngestParams {
    int maxPostContactSteps = 10;
    double stopEpsilon = 0.005;  ///< meters per step
    int stopSteps = 3;           ///< consecutive still steps that end the trace
};

/// Contact = end-effector position at the first closed-gripper sample; up to
/// maxPostContactSteps following positions trace the motion, cut short when
/// the end-effector moves less than stopEpsilon for stopSteps consecutive
/// steps (the still samples are dropped) or leaves the image.
AffordanceEntry ingest_robotic(const RobotTrajectory& trajectory, const CameraIntrinsics& K,
                               const Eigen::Isometry3d& cameraFromWorld, const EntryMeta& meta,
                               const RobotIngestParams& params = {});

/// Contact = mean of first-frame keypoints inside the object mask. Each
/// frame contributes the mean of all its keypoints; the resulting track is
/// shifted so that it starts at the contact point. Frames without keypoints
/// are skipped.
AffordanceEntry ingest_hoi(const std::vector<std::vector<Eigen::Vector2d>>& frames, const PixelMask& objectMask,
                           const EntryMeta& meta);

/// nPoints evenly spaced waypoints from start to end inclusive.
AffordanceEntry ingest_custom(const Eigen::Vector2d& start, const Eigen::Vector2d& end, int nPoints, int imageWidth,
                              int imageHeight, const EntryMeta& meta);

// ---------------------------------------------------------------------------
// Persistence

/// Checks the entry invariants; with a root directory also checks that every
/// referenced file exists (MissingAsset names the path).
void validate_entry(const AffordanceEntry& entry, const std::filesystem::path* root = nullptr);

/// Reads memory.json; asset paths resolve against the manifest's directory.
AffordanceMemory load_memory(const std::filesystem::path& manifestPath);

/// Atomic write (temporary file + rename).
void save_memory(const AffordanceMemory& memory, const std::filesystem::path& manifestPath);

/// Manifest text for a memory, as written by save_memory.
std::string manifest_json(const AffordanceMemory& memory);

struct EntryAssets {
    DenseFeatureMap features;  ///< always normalized
    std::optional<PixelMask> mask;
};

/// Loads (and normalizes if needed) an entry's feature map and mask,
/// checking them against the entry's image size.
EntryAssets load_assets(const AffordanceMemory& memory, const AffordanceEntry& entry);

}  // namespace ram
