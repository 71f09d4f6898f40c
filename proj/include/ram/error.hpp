#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ram {

enum class ErrorCode {
    // geometry
    OutOfBounds,
    NoValidDepth,
    BehindCamera,
    DegenerateProjection,
    EmptyCloud,
    EmptyCrop,
    InsufficientNeighbors,
    DegenerateNeighborhood,
    // feature store and file formats
    BadMagic,
    TruncatedFile,
    DimensionMismatch,
    ZeroVector,
    EmptyMask,
    NotNormalized,
    IoError,
    // memory
    NoContactEvent,
    ProjectionOutOfImage,
    NoContactInMask,
    DegenerateAnnotation,
    InsufficientWaypoints,
    ManifestParseError,
    MissingAsset,
    DuplicateId,
    // retrieval
    EmptyMemory,
    // transfer
    InsufficientPoints,
    DegenerateLine,
    LowConfidenceTransfer,
    // lifting
    AmbiguousDirection,
    NoGraspCandidates,
    // synth
    PlaneNotVisible,
    DegenerateGeometry,
    NonInvertibleWarp,
    // general
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code, an
/// optional pipeline stage and an optional offending path.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string path = {})
        : std::runtime_error(message), code_(code), path_(std::move(path)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }
    const std::string& stage() const noexcept { return stage_; }

    /// Returns a copy tagged with the pipeline stage that raised it.
    Error with_stage(std::string stage) const {
        Error e = *this;
        e.stage_ = std::move(stage);
        return e;
    }

private:
    ErrorCode code_;
    std::string path_;
    std::string stage_;
};

}  // namespace ram
