#include "ram/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace ram {

std::vector<TaskMatch> retrieve_task(const Embedding& instruction, const AffordanceMemory& memory, int topK) {
    if (memory.empty()) throw Error(ErrorCode::EmptyMemory, "the affordance memory is empty");
    std::vector<TaskMatch> ranked;
    for (const auto& [task, ids] : memory.task_index()) {
        const Embedding& e = memory.entry(ids.front()).taskEmbedding;
        if (e.values.size() != instruction.values.size()) {
            throw Error(ErrorCode::DimensionMismatch, "task '" + task + "' embedding has a different dimension");
        }
        ranked.push_back({task, (e.values.cast<double>() - instruction.values.cast<double>()).norm()});
    }
    std::sort(ranked.begin(), ranked.end(), [](const TaskMatch& a, const TaskMatch& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.task < b.task;
    });
    ranked.resize(std::min(ranked.size(), static_cast<std::size_t>(std::max(topK, 1))));
    return ranked;
}

std::vector<const AffordanceEntry*> SemanticFilterResult::retained() const {
    std::vector<const AffordanceEntry*> out;
    for (const auto& s : scores)
        if (s.retained) out.push_back(s.entry);
    return out;
}

SemanticFilterResult semantic_filter(std::span<const AffordanceEntry* const> entries, const Embedding& targetImage,
                                     const Embedding& objectName, double threshold) {
    SemanticFilterResult result;
    std::size_t best = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Embedding& img = entries[i]->imageEmbedding;
        const double sim = cosine(img, targetImage) * cosine(img, objectName);
        result.scores.push_back({entries[i], sim, sim >= threshold});
        if (sim > result.scores[best].similarity) best = i;
    }
    const bool any = std::any_of(result.scores.begin(), result.scores.end(), [](const SemanticScore& s) { return s.retained; });
    if (!any && !result.scores.empty()) {
        result.scores[best].retained = true;
        result.failOpen = true;
    }
    return result;
}

double imd(const DenseFeatureMap& source, std::span<const int> sourceCells, const DenseFeatureMap& target,
           std::span<const int> targetCells) {
    if (!source.normalized || !target.normalized) throw Error(ErrorCode::NotNormalized, "IMD needs normalized feature maps");
    if (source.channels() != target.channels()) {
        throw Error(ErrorCode::DimensionMismatch, "IMD between maps with different channel counts");
    }
    if (sourceCells.empty()) throw Error(ErrorCode::EmptyMask, "source mask selects no cell");
    if (targetCells.empty()) throw Error(ErrorCode::EmptyMask, "target mask selects no cell");

    using Matrix = DenseFeatureMap::Matrix;
    const Eigen::Index m = static_cast<Eigen::Index>(targetCells.size());
    const Eigen::Index c = source.channels();
    Matrix T(m, c);
    Eigen::VectorXf tNorm2(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        T.row(j) = target.data.row(targetCells[static_cast<std::size_t>(j)]);
        tNorm2[j] = T.row(j).squaredNorm();
    }

    // The float GEMM ranks candidates by |b|^2 - 2 a.b; every candidate within
    // the rounding margin of the best is re-scored exactly in double so that
    // identical vectors give a distance of exactly zero.
    constexpr Eigen::Index kBlock = 256;
    constexpr float kMargin = 1e-4f;
    double total = 0.0;
    Matrix S;
    Eigen::MatrixXf G;
    for (std::size_t start = 0; start < sourceCells.size(); start += kBlock) {
        const Eigen::Index b = static_cast<Eigen::Index>(std::min<std::size_t>(kBlock, sourceCells.size() - start));
        S.resize(b, c);
        for (Eigen::Index r = 0; r < b; ++r) S.row(r) = source.data.row(sourceCells[start + static_cast<std::size_t>(r)]);
        G.noalias() = S * T.transpose();
        for (Eigen::Index r = 0; r < b; ++r) {
            Eigen::VectorXf key = tNorm2 - 2.0f * G.row(r).transpose();
            const float lo = key.minCoeff();
            double bestDist = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < m; ++j) {
                if (key[j] > lo + kMargin) continue;
                const double d = (S.row(r).cast<double>() - T.row(j).cast<double>()).squaredNorm();
                if (d < bestDist) bestDist = d;
            }
            total += std::sqrt(bestDist);
        }
    }
    return total / static_cast<double>(sourceCells.size());
}

double imd(const DenseFeatureMap& source, const PixelMask* sourceMask, const DenseFeatureMap& target,
           const PixelMask* targetMask) {
    const std::vector<int> s = mask_cells(source, sourceMask);
    const std::vector<int> t = mask_cells(target, targetMask);
    return imd(source, s, target, t);
}

GeometricResult geometric_retrieve(std::span<const GeometricCandidate> candidates, const DenseFeatureMap& target,
                                   const PixelMask* targetMask) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyMemory, "no candidate survives filtering");
    const std::vector<int> targetCells = mask_cells(target, targetMask);
    GeometricResult result;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const std::vector<int> sourceCells = mask_cells(*cand.features, cand.mask);
        result.scores.push_back(imd(*cand.features, sourceCells, target, targetCells));
        const double best = result.scores[result.best];
        const double cur = result.scores[i];
        if (cur < best || (cur == best && cand.entry->id < candidates[result.best].entry->id)) result.best = i;
    }
    return result;
}

namespace {

template <typename F>
auto run_stage(const char* stage, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw e.with_stage(stage);
    }
}

}  // namespace

RetrievalResult retrieve(const RetrievalQuery& query, const AffordanceMemory& memory, const RetrievalParams& params,
                         const AssetLoader& loadAssets) {
    RetrievalResult result;
    result.stageTrace.memory = static_cast<int>(memory.entries().size());

    result.tasks = run_stage("task", [&] { return retrieve_task(query.instructionEmbedding, memory, params.taskTopK); });
    if (!result.tasks.empty() && result.tasks.front().distance > params.taskWarnDistance) {
        result.warnings.push_back("no stored task is close to the instruction; using nearest task '" +
                                  result.tasks.front().task + "' at distance " +
                                  std::to_string(result.tasks.front().distance));
    }
    std::set<std::string> selected;
    for (const auto& t : result.tasks) selected.insert(t.task);
    for (const auto& name : query.fallbackTasks) {
        if (memory.task_index().count(name) == 0) {
            result.warnings.push_back("fallback task '" + name + "' is not in the memory");
            continue;
        }
        if (selected.insert(name).second) {
            const Embedding& e = memory.entry(memory.task_index().at(name).front()).taskEmbedding;
            result.tasks.push_back({name, (e.values.cast<double>() - query.instructionEmbedding.values.cast<double>()).norm()});
        }
    }

    std::vector<const AffordanceEntry*> taskEntries;
    for (const auto& e : memory.entries())
        if (selected.count(e.task)) taskEntries.push_back(&e);
    result.stageTrace.task = static_cast<int>(taskEntries.size());

    const SemanticFilterResult filtered = run_stage("semantic", [&] {
        return semantic_filter(taskEntries, query.targetImageEmbedding, query.objectNameEmbedding,
                               params.semanticThreshold);
    });
    result.semanticFailOpen = filtered.failOpen;
    if (filtered.failOpen) result.warnings.push_back("no entry passed the semantic threshold; kept the best one");
    const std::vector<const AffordanceEntry*> survivors = filtered.retained();
    result.stageTrace.semantic = static_cast<int>(survivors.size());

    std::vector<EntryAssets> assets;
    assets.reserve(survivors.size());
    std::vector<GeometricCandidate> candidates;
    const GeometricResult geo = run_stage("geometric", [&] {
        for (const auto* e : survivors) assets.push_back(loadAssets(*e));
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            candidates.push_back({survivors[i], &assets[i].features, assets[i].mask ? &*assets[i].mask : nullptr});
        }
        const DenseFeatureMap target =
            query.targetFeatures.normalized ? query.targetFeatures : normalize_features(query.targetFeatures);
        return geometric_retrieve(candidates, target, query.targetMask ? &*query.targetMask : nullptr);
    });
    result.stageTrace.geometric = 1;

    const AffordanceEntry& chosen = *survivors[geo.best];
    result.entryId = chosen.id;
    result.imdScore = geo.scores[geo.best];
    for (const auto& t : result.tasks)
        if (t.task == chosen.task) result.taskScore = t.distance;

    std::map<const AffordanceEntry*, double> imdOf;
    for (std::size_t i = 0; i < survivors.size(); ++i) imdOf[survivors[i]] = geo.scores[i];
    for (const auto& s : filtered.scores) {
        EntryReport r{s.entry->id, s.entry->task, s.similarity, s.retained, std::nullopt};
        if (auto it = imdOf.find(s.entry); it != imdOf.end()) r.imd = it->second;
        if (s.entry == &chosen) result.semanticScore = s.similarity;
        result.entries.push_back(std::move(r));
    }
    return result;
}

RetrievalResult retrieve(const RetrievalQuery& query, const AffordanceMemory& memory, const RetrievalParams& params) {
    return retrieve(query, memory, params, [&](const AffordanceEntry& e) { return load_assets(memory, e); });
}

}  // namespace ram
