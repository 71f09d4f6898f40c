#pragma once

// Coarse-to-fine demonstration retrieval: task retrieval on language
// embeddings, semantic filtering on joint image/object-name similarity, then
// geometric retrieval by instance matching distance (IMD) between dense
// feature maps.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ram/features.hpp"
#include "ram/memory.hpp"

namespace ram {

struct RetrievalQuery {
    Embedding instructionEmbedding;  ///< text embedding of the instruction's task
    Embedding objectNameEmbedding;   ///< text embedding of the object name
    Embedding targetImageEmbedding;  ///< image embedding of the observation
    DenseFeatureMap targetFeatures;
    std::optional<PixelMask> targetMask;
    /// Extra task names to search besides the nearest ones (e.g. proposed
    /// by an operator for an object the memory has never seen).
    std::vector<std::string> fallbackTasks;
};

struct RetrievalParams {
    int taskTopK = 1;
    double semanticThreshold = 0.5;
    /// A warning is attached when the nearest task embedding is farther than this.
    double taskWarnDistance = 0.5;
};

struct TaskMatch {
    std::string task;
    double distance = 0.0;  ///< L2 between instruction and task embeddings
};

/// All distinct tasks ranked by ascending L2 distance (ties by task name),
/// truncated to topK. A task's embedding is that of its first entry.
/// Throws EmptyMemory.
std::vector<TaskMatch> retrieve_task(const Embedding& instruction, const AffordanceMemory& memory, int topK = 1);

struct SemanticScore {
    const AffordanceEntry* entry = nullptr;
    double similarity = 0.0;
    bool retained = false;
};

struct SemanticFilterResult {
    std::vector<SemanticScore> scores;  ///< input order
    bool failOpen = false;              ///< nothing passed; the best entry was kept

    std::vector<const AffordanceEntry*> retained() const;
};

/// similarity = cos(img_S, img_T) * cos(img_S, name); entries at or above the
/// threshold are kept. If none pass, the best-scoring entry (first on ties)
/// is kept alone.
SemanticFilterResult semantic_filter(std::span<const AffordanceEntry* const> entries, const Embedding& targetImage,
                                     const Embedding& objectName, double threshold);

/// Mean over source cells of the L2 distance to the nearest target cell.
/// Both maps must be normalized and share a channel count. Throws EmptyMask
/// when either cell list is empty.
double imd(const DenseFeatureMap& source, std::span<const int> sourceCells, const DenseFeatureMap& target,
           std::span<const int> targetCells);

double imd(const DenseFeatureMap& source, const PixelMask* sourceMask, const DenseFeatureMap& target,
           const PixelMask* targetMask);

struct GeometricCandidate {
    const AffordanceEntry* entry = nullptr;
    const DenseFeatureMap* features = nullptr;
    const PixelMask* mask = nullptr;
};

struct GeometricResult {
    std::size_t best = 0;        ///< index into the candidate list
    std::vector<double> scores;  ///< IMD per candidate
};

/// Candidate with minimal IMD against the target; ties go to the smaller
/// entry id.
GeometricResult geometric_retrieve(std::span<const GeometricCandidate> candidates, const DenseFeatureMap& target,
                                   const PixelMask* targetMask);

struct StageTrace {
    int memory = 0;
    int task = 0;
    int semantic = 0;
    int geometric = 0;
};

struct EntryReport {
    std::string id;
    std::string task;
    double semanticScore = 0.0;
    bool retained = false;
    std::optional<double> imd;
};

struct RetrievalResult {
    std::string entryId;
    double taskScore = 0.0;  ///< L2 distance of the selected entry's task
    double semanticScore = 0.0;
    double imdScore = 0.0;
    StageTrace stageTrace;
    std::vector<TaskMatch> tasks;
    std::vector<EntryReport> entries;
    bool semanticFailOpen = false;
    std::vector<std::string> warnings;
};

using AssetLoader = std::function<EntryAssets(const AffordanceEntry&)>;

/// Full three-stage retrieval. Stage errors are rethrown tagged with the
/// stage name ("task", "semantic", "geometric").
RetrievalResult retrieve(const RetrievalQuery& query, const AffordanceMemory& memory, const RetrievalParams& params,
                         const AssetLoader& loadAssets);

/// Same, loading entry assets from the memory's directory.
RetrievalResult retrieve(const RetrievalQuery& query, const AffordanceMemory& memory, const RetrievalParams& params = {});

}  // namespace ram
