#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "s2d/geometry.h"
#include "s2d/pipeline.h"
#include "s2d/retrieval.h"
#include "s2d/tensor.h"

// On-disk formats. Binary files are little-endian; decoders validate the
// magic, the header dimensions and the exact payload length.
namespace s2d::io {

using Bytes = std::vector<std::uint8_t>;

Bytes ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

// "FGRD", u32 width, height, channels, f32 values (row-major, channel-last).
Bytes EncodeFeatureGrid(const FeatureGrid& grid);
FeatureGrid DecodeFeatureGrid(std::span<const std::uint8_t> bytes);

// "GDSC", u32 dim, f32[dim].
Bytes EncodeGlobalDescriptor(std::span<const float> values);
std::vector<float> DecodeGlobalDescriptor(std::span<const std::uint8_t> bytes);

// "SDSC", u32 count, u32 dim, count x dim f32. keypoint_index = position.
Bytes EncodeSparseDescriptors(std::span<const SparseDescriptor> descriptors);
std::vector<SparseDescriptor> DecodeSparseDescriptors(std::span<const std::uint8_t> bytes);

struct KeypointLandmark {
  PixelPoint keypoint;
  Landmark landmark = Landmark::Zero();
};

// "KPLM", u32 count, then per record f32 x, y, X, Y, Z.
Bytes EncodeKeypointsLandmarks(std::span<const KeypointLandmark> records);
std::vector<KeypointLandmark> DecodeKeypointsLandmarks(std::span<const std::uint8_t> bytes);

// "PCAM", u32 input_dim, u32 output_dim, u32 whiten, f64 epsilon,
// f64 total_variance, f64 mean[D], f64 eigenvalues[K], f64 basis[K x D].
Bytes EncodePcaModel(const PcaModel& model);
PcaModel DecodePcaModel(std::span<const std::uint8_t> bytes);

// Pose lines: "id qw qx qy qz tx ty tz" (world-to-camera). '#' starts a comment.
std::string FormatPoseLine(const std::string& id, const Pose& pose);
std::vector<std::pair<std::string, Pose>> ParsePoseFile(std::string_view text);

// Reference manifest, one entry per line:
//   id global sparse kplm fx fy cx cy width height qw qx qy qz tx ty tz
// Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string global_path;
  std::string sparse_path;
  std::string kplm_path;
  Intrinsics intrinsics;
  ImageSize image;
  Pose pose;
};
std::string FormatManifest(std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> ParseManifest(std::string_view text);

// Query list, one entry per line: id dense global fx fy cx cy width height
struct QueryListEntry {
  std::string id;
  std::string dense_path;
  std::string global_path;
  Intrinsics intrinsics;
  ImageSize image;
};
std::string FormatQueryList(std::span<const QueryListEntry> entries);
std::vector<QueryListEntry> ParseQueryList(std::string_view text);

// Loads every file referenced by a manifest located in `base_dir`.
std::vector<ReferenceEntry> LoadReferences(std::span<const ManifestEntry> entries,
                                           const std::filesystem::path& base_dir);
QueryInput LoadQuery(const QueryListEntry& entry,
                     const std::filesystem::path& base_dir);

// query_id,localized,qw,qx,qy,qz,tx,ty,tz,inliers,best_ref,neighbors_tried
std::string FormatResultsCsv(std::span<const LocalizationResult> results);
std::vector<LocalizationResult> ParseResultsCsv(std::string_view text);

// Aligned text table with one column per threshold.
std::string FormatRecallTable(const RecallReport& report);
// JSON document with the same content.
std::string FormatRecallJson(const RecallReport& report);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);

}  // namespace s2d::io
