#include "s2d/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Core>

#include "s2d/error.h"
#include "s2d/parallel.h"

namespace s2d::synth {
namespace {

constexpr double kMinVisibleDepth = 0.1;

using Rng = std::mt19937_64;

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<float> RandomUnit(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double sum = 0.0;
  do {
    sum = 0.0;
    for (double& x : v) {
      x = normal(rng);
      sum += x * x;
    }
  } while (sum < 1e-20);
  const double norm = std::sqrt(sum);
  std::vector<float> out(dim);
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

CameraView PlaceCamera(const SceneOptions& options,
                       std::span<const Landmark> landmarks, Rng& rng,
                       double base_angle, double angle_jitter) {
  const double ring_radius = std::max(options.extent.x(), options.extent.y());
  CameraView view;
  view.image = options.image;
  view.intrinsics = {options.focal_px, options.focal_px,
                     options.image.width / 2.0 - 0.5,
                     options.image.height / 2.0 - 0.5};
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const double angle = base_angle + Uniform(rng, -angle_jitter, angle_jitter);
    const double radius = ring_radius * Uniform(rng, 0.9, 1.1);
    const Vector3d center(radius * std::cos(angle), radius * std::sin(angle),
                          options.extent.z() * Uniform(rng, -0.2, 0.2));
    const Vector3d target(options.extent.x() * Uniform(rng, -0.1, 0.1),
                          options.extent.y() * Uniform(rng, -0.1, 0.1),
                          options.extent.z() * Uniform(rng, -0.1, 0.1));
    view.pose = LookAt(center, target);
    if (static_cast<int>(VisibleLandmarks(landmarks, view).size()) >=
        options.min_visible) {
      return view;
    }
  }
  throw Error(ErrorCode::kUnsatisfiableVisibility,
              "could not place a camera seeing " +
                  std::to_string(options.min_visible) + " landmarks after " +
                  std::to_string(options.max_attempts) + " attempts");
}

CameraTensors MakeCameraTensors(const SyntheticScene& scene,
                                const CameraView& view,
                                const std::vector<std::vector<float>>& descriptors,
                                const TensorOptions& options, Rng& rng) {
  const int stride = options.grid_stride;
  const int channels = options.channels;
  const int grid_w = view.image.width / stride;
  const int grid_h = view.image.height / stride;

  CameraTensors out;
  out.landmark_ids = VisibleLandmarks(scene.landmarks, view);
  std::vector<double> depths;
  for (const int id : out.landmark_ids) {
    out.keypoints.push_back(Project(view.pose, view.intrinsics, scene.landmarks[id]));
    out.landmarks.push_back(scene.landmarks[id]);
    depths.push_back(view.pose.Transform(scene.landmarks[id]).z());
  }

  // Background first, then planted cells on top.
  out.dense = FeatureGrid(grid_w, grid_h, channels);
  std::vector<std::vector<double>> planted_basis;
  if (options.noise.background == BackgroundMode::kOrthogonal) {
    S2D_CHECK(out.landmark_ids.size() < static_cast<std::size_t>(channels),
              ErrorCode::kInvalidArgument,
              "orthogonal background needs more channels (" +
                  std::to_string(channels) + ") than planted descriptors (" +
                  std::to_string(out.landmark_ids.size()) + ")");
    for (const int id : out.landmark_ids) {
      std::vector<double> v(descriptors[id].begin(), descriptors[id].end());
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : planted_basis) {
          double dot = 0.0;
          for (int c = 0; c < channels; ++c) dot += q[c] * v[c];
          for (int c = 0; c < channels; ++c) v[c] -= dot * q[c];
        }
      }
      double norm = 0.0;
      for (const double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-9) continue;
      for (double& x : v) x /= norm;
      planted_basis.push_back(std::move(v));
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd background(out.dense.num_cells(), channels);
  for (Eigen::Index i = 0; i < background.rows(); ++i) {
    for (int c = 0; c < channels; ++c) background(i, c) = normal(rng);
  }
  if (!planted_basis.empty()) {
    Eigen::MatrixXd basis(planted_basis.size(), channels);
    for (std::size_t i = 0; i < planted_basis.size(); ++i) {
      for (int c = 0; c < channels; ++c) basis(i, c) = planted_basis[i][c];
    }
    for (int pass = 0; pass < 2; ++pass) {
      background -= (background * basis.transpose()) * basis;
    }
  }
  for (Eigen::Index i = 0; i < background.rows(); ++i) {
    const double norm = background.row(i).norm();
    auto cell = out.dense.MutableCell(static_cast<std::size_t>(i));
    for (int c = 0; c < channels; ++c) {
      cell[c] = norm > 0.0 ? static_cast<float>(background(i, c) / norm) : 0.0f;
    }
  }

  // Planted descriptors, farthest first so the nearest landmark owns a cell.
  std::vector<std::size_t> order(out.landmark_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return depths[a] > depths[b];
  });
  std::vector<std::pair<int, int>> cells(out.landmark_ids.size());
  const double noise_std =
      options.noise.descriptor_noise_sigma / std::sqrt(static_cast<double>(channels));
  std::vector<std::vector<float>> values(out.landmark_ids.size());
  for (std::size_t i = 0; i < out.landmark_ids.size(); ++i) {
    cells[i] = {ContainingCell(out.keypoints[i].x, view.image.width, grid_w),
                ContainingCell(out.keypoints[i].y, view.image.height, grid_h)};
    const bool outlier = Uniform(rng, 0.0, 1.0) < options.noise.outlier_fraction;
    const int rx = std::uniform_int_distribution<int>(0, grid_w - 1)(rng);
    const int ry = std::uniform_int_distribution<int>(0, grid_h - 1)(rng);
    if (outlier) cells[i] = {rx, ry};
    const auto& clean = descriptors[out.landmark_ids[i]];
    values[i].resize(channels);
    for (int c = 0; c < channels; ++c) {
      const double n = noise_std > 0.0 ? noise_std * normal(rng) : 0.0;
      values[i][c] = static_cast<float>(clean[c] + n);
    }
    NormalizeInPlace(values[i]);
  }
  for (const std::size_t i : order) {
    auto cell = out.dense.MutableCell(cells[i].first, cells[i].second);
    std::copy(values[i].begin(), values[i].end(), cell.begin());
  }

  out.sparse = SampleSparse(out.dense, out.keypoints, view.image, SampleMode::kNearest);

  std::vector<double> mean(channels, 0.0);
  for (const int id : out.landmark_ids) {
    for (int c = 0; c < channels; ++c) mean[c] += descriptors[id][c];
  }
  std::vector<float> mean_f(mean.begin(), mean.end());
  out.global = MakeGlobalDescriptor(mean_f);
  return out;
}

}  // namespace

std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<int> VisibleLandmarks(std::span<const Landmark> landmarks,
                                  const CameraView& view) {
  std::vector<int> visible;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Vector3d x = view.pose.Transform(landmarks[i]);
    if (x.z() < kMinVisibleDepth) continue;
    PixelPoint px;
    if (!TryProject(view.pose, view.intrinsics, landmarks[i], &px)) continue;
    if (px.x >= 0.0 && px.x < view.image.width && px.y >= 0.0 &&
        px.y < view.image.height) {
      visible.push_back(static_cast<int>(i));
    }
  }
  return visible;
}

SyntheticScene GenScene(std::uint64_t seed, const SceneOptions& options) {
  S2D_CHECK(options.num_landmarks >= 1 && options.num_refs >= 1 &&
                options.num_queries >= 1,
            ErrorCode::kInvalidArgument, "scene counts must be >= 1");
  S2D_CHECK((options.extent.array() > 0.0).all(), ErrorCode::kInvalidArgument,
            "scene extent must be positive");
  S2D_CHECK(options.image.width >= 1 && options.image.height >= 1 &&
                options.focal_px > 0.0,
            ErrorCode::kInvalidArgument, "invalid camera model");

  SyntheticScene scene;
  scene.seed = seed;
  Rng landmark_rng(StreamSeed(seed, 1));
  for (int i = 0; i < options.num_landmarks; ++i) {
    scene.landmarks.emplace_back(
        Uniform(landmark_rng, -0.5, 0.5) * options.extent.x(),
        Uniform(landmark_rng, -0.5, 0.5) * options.extent.y(),
        Uniform(landmark_rng, -0.5, 0.5) * options.extent.z());
  }
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < options.num_refs; ++i) {
    Rng rng(StreamSeed(seed, 1000 + static_cast<std::uint64_t>(i)));
    const double spacing = two_pi / options.num_refs;
    scene.references.push_back(
        PlaceCamera(options, scene.landmarks, rng, i * spacing, 0.3 * spacing));
  }
  for (int i = 0; i < options.num_queries; ++i) {
    Rng rng(StreamSeed(seed, 1000000 + static_cast<std::uint64_t>(i)));
    const double angle = Uniform(rng, 0.0, two_pi);
    scene.queries.push_back(PlaceCamera(options, scene.landmarks, rng, angle, 0.0));
  }
  return scene;
}

SyntheticTensors GenFeatureTensors(const SyntheticScene& scene,
                                   const TensorOptions& options) {
  S2D_CHECK(options.channels >= 8, ErrorCode::kInvalidArgument,
            "synthetic tensors need at least 8 channels");
  S2D_CHECK(options.grid_stride >= 1, ErrorCode::kInvalidArgument,
            "grid stride must be >= 1");
  S2D_CHECK(options.noise.descriptor_noise_sigma >= 0.0 &&
                options.noise.outlier_fraction >= 0.0 &&
                options.noise.outlier_fraction <= 1.0,
            ErrorCode::kInvalidArgument, "invalid noise specification");
  auto check_view = [&](const CameraView& view) {
    S2D_CHECK(view.image.width % options.grid_stride == 0 &&
                  view.image.height % options.grid_stride == 0,
              ErrorCode::kInvalidArgument,
              "grid stride must divide the image dimensions");
  };
  for (const auto& v : scene.references) check_view(v);
  for (const auto& v : scene.queries) check_view(v);

  SyntheticTensors out;
  Rng descriptor_rng(StreamSeed(scene.seed, 2));
  for (std::size_t i = 0; i < scene.landmarks.size(); ++i) {
    out.landmark_descriptors.push_back(RandomUnit(descriptor_rng, options.channels));
  }

  const std::size_t num_refs = scene.references.size();
  const std::size_t total = num_refs + scene.queries.size();
  std::vector<CameraTensors> cameras(total);
  ParallelFor(0, total, 1, [&](std::size_t i) {
    Rng rng(StreamSeed(scene.seed, 3000000 + i));
    const CameraView& view =
        i < num_refs ? scene.references[i] : scene.queries[i - num_refs];
    cameras[i] = MakeCameraTensors(scene, view, out.landmark_descriptors, options, rng);
  });
  out.references.assign(std::make_move_iterator(cameras.begin()),
                        std::make_move_iterator(cameras.begin() + num_refs));
  out.queries.assign(std::make_move_iterator(cameras.begin() + num_refs),
                     std::make_move_iterator(cameras.end()));
  return out;
}

std::string ReferenceId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ref_%04d", index);
  return buf;
}

std::string QueryId(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "query_%04d", index);
  return buf;
}

std::vector<ReferenceEntry> MakeReferenceEntries(const SyntheticScene& scene,
                                                 const SyntheticTensors& tensors) {
  std::vector<ReferenceEntry> refs;
  for (std::size_t i = 0; i < scene.references.size(); ++i) {
    const auto& view = scene.references[i];
    const auto& t = tensors.references[i];
    ReferenceEntry entry;
    entry.id = ReferenceId(static_cast<int>(i));
    entry.global = t.global;
    entry.intrinsics = view.intrinsics;
    entry.pose = view.pose;
    entry.image = view.image;
    entry.keypoints = t.keypoints;
    entry.descriptors = t.sparse;
    entry.landmarks = t.landmarks;
    refs.push_back(std::move(entry));
  }
  return refs;
}

std::vector<QueryInput> MakeQueryInputs(const SyntheticScene& scene,
                                        const SyntheticTensors& tensors) {
  std::vector<QueryInput> queries;
  for (std::size_t i = 0; i < scene.queries.size(); ++i) {
    const auto& view = scene.queries[i];
    QueryInput q;
    q.id = QueryId(static_cast<int>(i));
    q.intrinsics = view.intrinsics;
    q.dense = tensors.queries[i].dense;
    q.global = tensors.queries[i].global;
    q.image = view.image;
    queries.push_back(std::move(q));
  }
  return queries;
}

std::map<std::string, Pose> QueryGroundTruth(const SyntheticScene& scene) {
  std::map<std::string, Pose> gt;
  for (std::size_t i = 0; i < scene.queries.size(); ++i) {
    gt[QueryId(static_cast<int>(i))] = scene.queries[i].pose;
  }
  return gt;
}

CorrelationMap OracleCorrelate(const FeatureGrid& dense, const SparseDescriptor& d) {
  S2D_CHECK(static_cast<int>(d.values.size()) == dense.channels(),
            ErrorCode::kChannelMismatch, "descriptor/grid channel mismatch");
  CorrelationMap map;
  map.width = dense.width();
  map.height = dense.height();
  map.values.resize(dense.num_cells());
  for (int y = 0; y < dense.height(); ++y) {
    for (int x = 0; x < dense.width(); ++x) {
      double sum = 0.0;
      for (int c = 0; c < dense.channels(); ++c) {
        sum += static_cast<double>(dense.at(x, y, c)) * d.values[c];
      }
      map.values[static_cast<std::size_t>(y) * dense.width() + x] =
          static_cast<float>(sum);
    }
  }
  return map;
}

std::vector<std::pair<int, int>> MutualNearestNeighbors(
    std::span<const SparseDescriptor> a, std::span<const SparseDescriptor> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<int> best_b(a.size(), -1);
  std::vector<int> best_a(b.size(), -1);
  std::vector<double> score_b(a.size(), -std::numeric_limits<double>::infinity());
  std::vector<double> score_a(b.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < a[i].values.size(); ++c) {
        dot += static_cast<double>(a[i].values[c]) * b[j].values[c];
      }
      if (dot > score_b[i]) {
        score_b[i] = dot;
        best_b[i] = static_cast<int>(j);
      }
      if (dot > score_a[j]) {
        score_a[j] = dot;
        best_a[j] = static_cast<int>(i);
      }
    }
  }
  std::vector<std::pair<int, int>> matches;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (best_b[i] >= 0 && best_a[best_b[i]] == static_cast<int>(i)) {
      matches.emplace_back(static_cast<int>(i), best_b[i]);
    }
  }
  return matches;
}

}  // namespace s2d::synth
