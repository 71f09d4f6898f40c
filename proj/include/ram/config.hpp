#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ram/lift.hpp"
#include "ram/memory.hpp"
#include "ram/retrieval.hpp"
#include "ram/transfer.hpp"

namespace ram {

/// Every tunable constant of the pipeline. `ram config init` writes the
/// defaults so a run can be reproduced from the file alone.
struct PipelineConfig {
    RetrievalParams retrieval;
    std::vector<std::string> fallbackTasks;
    TransferParams transfer;
    bool maskedCorrespondence = true;  ///< restrict matching to the target mask when one exists
    LiftParams lift;
    std::uint64_t liftSeed = 0;
    RobotIngestParams robotIngest;
    int customPoints = 10;

    /// Throws InvalidArgument naming the first out-of-range field.
    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace ram
