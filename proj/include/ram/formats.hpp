#pragma once

// Little-endian binary formats shared with the feature extractor.
//
//   .dpt  "DPT1" u32 height u32 width, height*width f32 depth (meters)
//   .dfm  "DFM1" u32 gridH gridW channels imageH imageW, u8 flags
//         (bit 0 = normalized), gridH*gridW*channels f32, channel-fastest
//   .emb  "EMB1" u8 kind (0 image, 1 text), u32 dim, dim f32
//   .msk  "MSK1" u32 height u32 width, ceil(h*w/8) bytes, row-major, MSB-first
//
// Loaders throw BadMagic, TruncatedFile (payload shorter than the header
// claims), DimensionMismatch (trailing bytes or zero sizes) and IoError.

#include <filesystem>

#include "ram/features.hpp"
#include "ram/geometry.hpp"
#include "ram/mask.hpp"

namespace ram {

DepthImage load_depth(const std::filesystem::path& path);
void save_depth(const DepthImage& depth, const std::filesystem::path& path);

DenseFeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const DenseFeatureMap& map, const std::filesystem::path& path);

Embedding load_embedding(const std::filesystem::path& path);
void save_embedding(const Embedding& embedding, const std::filesystem::path& path);

PixelMask load_mask(const std::filesystem::path& path);
void save_mask(const PixelMask& mask, const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ram
