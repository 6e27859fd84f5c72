#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "s2d/geometry.h"
#include "s2d/tensor.h"

namespace s2d {

// Dot products of one sparse descriptor against every cell of a dense grid.
struct CorrelationMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major

  std::size_t size() const { return values.size(); }
};

struct Peak {
  int x = 0;
  int y = 0;
  float value = 0.0f;
};

// Acceptance rule: peak / (value at descending rank floor(fraction * N)) > alpha.
struct RatioTestConfig {
  double alpha = 0.9;
  double fraction = 0.006;

  bool IsValid() const { return alpha > 0.0 && fraction >= 0.0 && fraction <= 1.0; }
};

struct RatioTestResult {
  bool accepted = false;
  double ratio = 0.0;
};

struct MatchOptions {
  // Parabolic sub-cell peak refinement. Off by default: the localization
  // results are defined on the integer argmax.
  bool subpixel_peak = false;
  // Descriptors correlated per pass; bounds the live correlation maps.
  std::size_t batch_size = 256;
};

struct MatchCandidate {
  int keypoint_index = 0;
  PixelPoint query_pixel;
  float peak_score = 0.0f;
  double ratio = 0.0;
  bool accepted = false;
  Landmark landmark = Landmark::Zero();
};

// Exhaustive correlation, f64 accumulation per cell. Throws ChannelMismatch.
CorrelationMap Correlate(const FeatureGrid& dense, const SparseDescriptor& d);

// One map per descriptor, same values as calling Correlate on each. The dense
// grid is streamed once per call.
std::vector<CorrelationMap> CorrelateBatch(
    const FeatureGrid& dense, std::span<const SparseDescriptor> descriptors);

// Global maximum; ties go to the lowest row-major index.
Peak ArgmaxPeak(const CorrelationMap& map);

// Element at descending rank floor(fraction * N) (rank 0 = maximum, clamped
// to N - 1), found by partial selection.
float QuantileValue(const CorrelationMap& map, double fraction);

// Precomputed-peak variant used by the matcher.
RatioTestResult RatioTest(double peak, double quantile, const RatioTestConfig& cfg);
RatioTestResult RatioTest(const CorrelationMap& map, const RatioTestConfig& cfg);

// Sparse-to-dense matching of one reference image against a query grid.
// Returns exactly sparse.size() candidates, in keypoint order.
std::vector<MatchCandidate> MatchReference(
    const FeatureGrid& dense, std::span<const SparseDescriptor> sparse,
    std::span<const Landmark> landmarks, const ImageSize& image,
    const RatioTestConfig& cfg, const MatchOptions& options = {});

}  // namespace s2d
