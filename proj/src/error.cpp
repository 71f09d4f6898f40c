#include "ram/error.hpp"

namespace ram {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::NoValidDepth: return "NoValidDepth";
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::DegenerateProjection: return "DegenerateProjection";
        case ErrorCode::EmptyCloud: return "EmptyCloud";
        case ErrorCode::EmptyCrop: return "EmptyCrop";
        case ErrorCode::InsufficientNeighbors: return "InsufficientNeighbors";
        case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::NoContactEvent: return "NoContactEvent";
        case ErrorCode::ProjectionOutOfImage: return "ProjectionOutOfImage";
        case ErrorCode::NoContactInMask: return "NoContactInMask";
        case ErrorCode::DegenerateAnnotation: return "DegenerateAnnotation";
        case ErrorCode::InsufficientWaypoints: return "InsufficientWaypoints";
        case ErrorCode::ManifestParseError: return "ManifestParseError";
        case ErrorCode::MissingAsset: return "MissingAsset";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyMemory: return "EmptyMemory";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::DegenerateLine: return "DegenerateLine";
        case ErrorCode::LowConfidenceTransfer: return "LowConfidenceTransfer";
        case ErrorCode::AmbiguousDirection: return "AmbiguousDirection";
        case ErrorCode::NoGraspCandidates: return "NoGraspCandidates";
        case ErrorCode::PlaneNotVisible: return "PlaneNotVisible";
        case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorCode::NonInvertibleWarp: return "NonInvertibleWarp";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace ram
