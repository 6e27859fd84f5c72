#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2d/geometry.h"
#include "s2d/matching.h"
#include "s2d/pipeline.h"
#include "s2d/retrieval.h"
#include "s2d/tensor.h"

namespace s2d::synth {

struct CameraView {
  Intrinsics intrinsics;
  Pose pose;
  ImageSize image;
};

struct SceneOptions {
  int num_landmarks = 200;
  int num_refs = 20;
  int num_queries = 10;
  Vector3d extent{10.0, 10.0, 10.0};  // box dimensions, meters
  ImageSize image{512, 512};
  double focal_px = 400.0;
  int min_visible = 20;
  int max_attempts = 1000;
};

// Landmarks uniform in a box centered at the origin, cameras on a jittered
// ring around it looking at the box center.
struct SyntheticScene {
  std::vector<Landmark> landmarks;
  std::vector<CameraView> references;
  std::vector<CameraView> queries;
  std::uint64_t seed = 0;
};

// Throws UnsatisfiableVisibility when a camera cannot be placed so that it
// sees at least min_visible landmarks within max_attempts draws.
SyntheticScene GenScene(std::uint64_t seed, const SceneOptions& options = {});

// Indices of landmarks in front of the camera that project inside the image.
std::vector<int> VisibleLandmarks(std::span<const Landmark> landmarks,
                                  const CameraView& view);

enum class BackgroundMode {
  // Background cells lie in the orthogonal complement of the descriptors
  // planted in the same grid, so they correlate to exactly zero with them.
  kOrthogonal,
  kRandomUnit,
};

struct NoiseSpec {
  // Gaussian perturbation of planted descriptors, expressed relative to the
  // unit descriptor norm: each channel gets N(0, sigma² / C).
  double descriptor_noise_sigma = 0.0;
  // Probability that a landmark's planted cell is moved to a random cell.
  double outlier_fraction = 0.0;
  BackgroundMode background = BackgroundMode::kRandomUnit;
};

struct TensorOptions {
  int grid_stride = 4;
  int channels = 64;
  NoiseSpec noise;
};

struct CameraTensors {
  FeatureGrid dense;
  std::vector<int> landmark_ids;          // visible landmarks, ascending
  std::vector<PixelPoint> keypoints;      // exact projections
  std::vector<SparseDescriptor> sparse;   // grid value at each keypoint cell
  std::vector<Landmark> landmarks;        // world positions of landmark_ids
  GlobalDescriptor global;                // normalized mean of visible descriptors
};

struct SyntheticTensors {
  std::vector<std::vector<float>> landmark_descriptors;
  std::vector<CameraTensors> references;
  std::vector<CameraTensors> queries;
};

SyntheticTensors GenFeatureTensors(const SyntheticScene& scene,
                                   const TensorOptions& options);

std::string ReferenceId(int index);
std::string QueryId(int index);

std::vector<ReferenceEntry> MakeReferenceEntries(const SyntheticScene& scene,
                                                 const SyntheticTensors& tensors);
std::vector<QueryInput> MakeQueryInputs(const SyntheticScene& scene,
                                        const SyntheticTensors& tensors);
std::map<std::string, Pose> QueryGroundTruth(const SyntheticScene& scene);

// Naive per-cell dot products accumulated in f64; reference for Correlate.
CorrelationMap OracleCorrelate(const FeatureGrid& dense, const SparseDescriptor& d);

// Mutual nearest neighbors by dot product between two descriptor sets:
// (index in a, index in b) pairs, ordered by index in a. Sparse-to-sparse
// baseline for comparisons against sparse-to-dense matching.
std::vector<std::pair<int, int>> MutualNearestNeighbors(
    std::span<const SparseDescriptor> a, std::span<const SparseDescriptor> b);

// Deterministic 64-bit stream seed derived from (seed, stream).
std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace s2d::synth
