#include "s2d/pipeline.h"

#include <algorithm>
#include <string>

#include "s2d/error.h"

namespace s2d {

void ReferenceEntry::Validate() const {
  const std::string where = "reference '" + id + "': ";
  S2D_CHECK(keypoints.size() == descriptors.size() &&
                keypoints.size() == landmarks.size(),
            ErrorCode::kLengthMismatch,
            where + "keypoint/descriptor/landmark counts differ");
  S2D_CHECK(intrinsics.IsValid(), ErrorCode::kInvalidArgument,
            where + "invalid intrinsics");
  S2D_CHECK(pose.IsValid(1e-6), ErrorCode::kInvalidArgument,
            where + "pose rotation is not orthonormal");
  S2D_CHECK(image.width >= 1 && image.height >= 1, ErrorCode::kInvalidArgument,
            where + "invalid image size");
  for (const auto& d : descriptors) {
    S2D_CHECK(d.values.size() == descriptors.front().values.size(),
              ErrorCode::kDimensionMismatch,
              where + "sparse descriptors have inconsistent dimensions");
  }
}

Localizer::Localizer(std::vector<ReferenceEntry> references)
    : references_(std::move(references)) {
  S2D_CHECK(!references_.empty(), ErrorCode::kEmptyDatabase,
            "no reference entries");
  for (const auto& ref : references_) {
    ref.Validate();
    if (!ref.descriptors.empty()) {
      const int dim = static_cast<int>(ref.descriptors.front().values.size());
      S2D_CHECK(descriptor_dim_ == 0 || descriptor_dim_ == dim,
                ErrorCode::kDimensionMismatch,
                "reference '" + ref.id + "' has descriptor dim " +
                    std::to_string(dim) + ", expected " +
                    std::to_string(descriptor_dim_));
      descriptor_dim_ = dim;
    }
    database_.Add(ref.id, ref.global);
  }
}

LocalizationResult Localizer::Localize(const QueryInput& query,
                                       const LocalizeOptions& options) const {
  S2D_CHECK(descriptor_dim_ == 0 || query.dense.channels() == descriptor_dim_,
            ErrorCode::kDimensionMismatch,
            "query '" + query.id + "' grid has " +
                std::to_string(query.dense.channels()) +
                " channels, references have " + std::to_string(descriptor_dim_));
  S2D_CHECK(options.n_neighbors >= 1, ErrorCode::kInvalidArgument,
            "n_neighbors must be >= 1");

  LocalizationResult result;
  result.query_id = query.id;
  const auto ranked = Rank(query.global, database_, options.n_neighbors);
  const std::size_t min_corrs =
      static_cast<std::size_t>(std::max(4, options.ransac.min_inliers));

  std::optional<PoseEstimate> best;
  for (const auto& neighbor : ranked) {
    const ReferenceEntry& ref = references_[neighbor.index];
    ++result.neighbors_tried;
    if (ref.descriptors.empty()) continue;

    const auto candidates =
        MatchReference(query.dense, ref.descriptors, ref.landmarks, query.image,
                       options.match, options.match_options);
    std::vector<Correspondence2D3D> corrs;
    for (const auto& cand : candidates) {
      if (cand.accepted) corrs.push_back({cand.query_pixel, cand.landmark});
    }
    result.accepted_match_count += static_cast<int>(corrs.size());
    if (corrs.size() < min_corrs) continue;

    auto estimate = RansacPnp(corrs, query.intrinsics, options.ransac);
    if (!estimate) continue;
    if (!best || estimate->inlier_indices.size() > best->inlier_indices.size()) {
      best = std::move(estimate);
      result.best_reference_id = ref.id;
    }
  }

  if (best) {
    result.pose = best->pose;
    result.inlier_count = static_cast<int>(best->inlier_indices.size());
  }
  return result;
}

LocalizationResult Localize(const QueryInput& query,
                            std::span<const ReferenceEntry> db,
                            const LocalizeOptions& options) {
  const Localizer localizer(std::vector<ReferenceEntry>(db.begin(), db.end()));
  return localizer.Localize(query, options);
}

void ApplyRetrievalFallback(const QueryInput& query, const Localizer& localizer,
                            LocalizationResult& result) {
  if (result.pose) return;
  const auto top = Rank(query.global, localizer.database(), 1);
  result.pose = localizer.references()[top.front().index].pose;
  result.best_reference_id = top.front().id;
  result.from_retrieval_fallback = true;
}

std::vector<RecallThreshold> DefaultRecallThresholds() {
  return {{0.25, 2.0}, {0.5, 5.0}, {5.0, 10.0}};
}

RecallReport EvaluateRecall(std::span<const LocalizationResult> results,
                            const std::map<std::string, Pose>& ground_truth,
                            std::span<const RecallThreshold> thresholds) {
  RecallReport report;
  report.total = static_cast<int>(results.size());
  for (const auto& t : thresholds) report.rows.push_back({t, 0, 0.0});

  for (const auto& result : results) {
    const auto gt = ground_truth.find(result.query_id);
    S2D_CHECK(gt != ground_truth.end(), ErrorCode::kMissingGroundTruth,
              "no ground-truth pose for query '" + result.query_id + "'");
    if (!result.pose) continue;
    ++report.localized;
    const PoseError err = ComputePoseError(*result.pose, gt->second);
    for (auto& row : report.rows) {
      if (err.position_m <= row.threshold.meters &&
          err.rotation_deg <= row.threshold.degrees) {
        ++row.count;
      }
    }
  }
  for (auto& row : report.rows) {
    row.recall_percent =
        report.total == 0 ? 0.0 : 100.0 * row.count / report.total;
  }
  return report;
}

}  // namespace s2d
