#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "s2d/pipeline.h"

namespace s2d {

// Fully resolved run parameters. Serialized as "key = value" lines with the
// field names below; the CLI exposes the same names as --kebab-case flags.
struct RunConfig {
  int n_neighbors = 15;
  double alpha = 0.9;
  double fraction = 0.006;
  double inlier_threshold_px = 12.0;
  int min_inliers = 15;
  double confidence = 0.99;
  int max_iterations = 5000;
  std::uint64_t seed = 0;
  bool refinement = true;
  int pca_dim = 1024;
  // 0 keeps local descriptors at their native dimension.
  int local_pca_dim = 0;
  bool fallback_retrieval_pose = false;

  void Validate() const;
  LocalizeOptions ToLocalizeOptions() const;

  bool operator==(const RunConfig&) const = default;
};

// Unknown keys and malformed values raise kParse; missing keys keep defaults.
RunConfig ParseRunConfig(std::string_view text);
// Updates `config` in place with the keys present in `text`.
void ApplyRunConfigText(std::string_view text, RunConfig& config);
std::string FormatRunConfig(const RunConfig& config);

}  // namespace s2d
