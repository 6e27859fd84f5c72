#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2d/geometry.h"
#include "s2d/matching.h"
#include "s2d/pose.h"
#include "s2d/retrieval.h"
#include "s2d/tensor.h"

namespace s2d {

// One registered database image.
struct ReferenceEntry {
  std::string id;
  GlobalDescriptor global;
  Intrinsics intrinsics;
  Pose pose;
  ImageSize image;
  std::vector<PixelPoint> keypoints;
  std::vector<SparseDescriptor> descriptors;
  std::vector<Landmark> landmarks;

  // Equal keypoint/descriptor/landmark counts, valid pose and intrinsics.
  void Validate() const;
};

struct QueryInput {
  std::string id;
  Intrinsics intrinsics;
  FeatureGrid dense;
  GlobalDescriptor global;
  ImageSize image;
};

struct LocalizationResult {
  std::string query_id;
  std::optional<Pose> pose;
  int inlier_count = 0;
  std::optional<std::string> best_reference_id;
  // Accepted sparse-to-dense matches summed over all neighbors tried.
  int accepted_match_count = 0;
  int neighbors_tried = 0;
  // Pose copied from the top-ranked reference instead of estimated.
  bool from_retrieval_fallback = false;
};

struct LocalizeOptions {
  std::size_t n_neighbors = 15;
  RatioTestConfig match;
  RansacConfig ransac;
  MatchOptions match_options;
};

// Retrieval, sparse-to-dense matching against each of the top neighbors and
// P3P-RANSAC; keeps the neighbor estimate with the most inliers (earlier
// neighbors win ties).
class Localizer {
 public:
  // Throws EmptyDatabase, DimensionMismatch or whatever Validate reports.
  explicit Localizer(std::vector<ReferenceEntry> references);

  LocalizationResult Localize(const QueryInput& query,
                              const LocalizeOptions& options) const;

  const std::vector<ReferenceEntry>& references() const { return references_; }
  const DescriptorDatabase& database() const { return database_; }

 private:
  std::vector<ReferenceEntry> references_;
  DescriptorDatabase database_;
  int descriptor_dim_ = 0;
};

// Convenience wrapper building a Localizer for one call.
LocalizationResult Localize(const QueryInput& query,
                            std::span<const ReferenceEntry> db,
                            const LocalizeOptions& options);

// Assigns the top-1 retrieved reference pose to an unlocalized result.
void ApplyRetrievalFallback(const QueryInput& query, const Localizer& localizer,
                            LocalizationResult& result);

struct RecallThreshold {
  double meters = 0.0;
  double degrees = 0.0;
};

// (0.25 m, 2°), (0.5 m, 5°), (5 m, 10°).
std::vector<RecallThreshold> DefaultRecallThresholds();

struct RecallReport {
  struct Row {
    RecallThreshold threshold;
    int count = 0;
    double recall_percent = 0.0;
  };
  std::vector<Row> rows;
  int localized = 0;
  int total = 0;
};

// A query counts at a threshold iff it has a pose within both limits.
// Throws MissingGroundTruth for results without a ground-truth pose.
RecallReport EvaluateRecall(std::span<const LocalizationResult> results,
                            const std::map<std::string, Pose>& ground_truth,
                            std::span<const RecallThreshold> thresholds);

}  // namespace s2d
