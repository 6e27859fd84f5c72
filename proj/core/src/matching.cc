#include "s2d/matching.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <string>

#include "s2d/error.h"
#include "s2d/parallel.h"

namespace s2d {
namespace {

// Descriptors are packed channel-major in groups of kLanes so the inner loop
// broadcasts one grid value against kLanes contiguous descriptor values. Each
// (cell, descriptor) dot product is still accumulated sequentially over the
// channels, in f64.
constexpr int kLanes = 8;
constexpr int kRows = 8;
constexpr std::size_t kCellsPerTask = 64;
constexpr std::size_t kConvertMinBlocks = 4;

using Lane = double __attribute__((vector_size(kLanes * sizeof(double))));

// Cell values for channel c and row r are read from cells[c * cstride + r *
// rstride], so the same kernel serves a converted f64 tile (channel-major) and
// the raw f32 grid rows.
template <int Rows, typename T>
void DotTile(const T* cells, std::size_t cstride, std::size_t rstride,
             const double* packed, int channels, double (&acc)[kRows][kLanes]) {
  Lane a[Rows] = {};
  for (int c = 0; c < channels; ++c) {
    Lane d;
    std::memcpy(&d, packed + static_cast<std::size_t>(c) * kLanes, sizeof(Lane));
    const T* v = cells + static_cast<std::size_t>(c) * cstride;
    for (int r = 0; r < Rows; ++r) a[r] += static_cast<double>(v[r * rstride]) * d;
  }
  for (int r = 0; r < Rows; ++r) std::memcpy(acc[r], &a[r], sizeof(Lane));
}

void CheckChannels(const FeatureGrid& dense, std::size_t dim) {
  S2D_CHECK(static_cast<int>(dim) == dense.channels(),
            ErrorCode::kChannelMismatch,
            "descriptor has " + std::to_string(dim) + " channels, grid has " +
                std::to_string(dense.channels()));
}

constexpr std::size_t kChunk = 16;
constexpr std::size_t kGroupSize = 32;

using Floats = float __attribute__((vector_size(kChunk * sizeof(float))));

// Maximum ignoring NaN, computed with packed max over kChunk-wide vectors.
float ChunkMax(const float* v, std::size_t n) {
  const float lowest = -std::numeric_limits<float>::infinity();
  Floats m;
  for (std::size_t j = 0; j < kChunk; ++j) m[j] = lowest;
  std::size_t i = 0;
  for (; i + kChunk <= n; i += kChunk) {
    Floats x;
    std::memcpy(&x, v + i, sizeof(Floats));
    m = x > m ? x : m;
  }
  float out = lowest;
  for (std::size_t j = 0; j < kChunk; ++j) out = m[j] > out ? m[j] : out;
  for (; i < n; ++i) out = v[i] > out ? v[i] : out;
  return out;
}

double ParabolicOffset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (std::abs(denom) < 1e-12) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<CorrelationMap> CorrelateBatch(
    const FeatureGrid& dense, std::span<const SparseDescriptor> descriptors) {
  for (const auto& d : descriptors) CheckChannels(dense, d.values.size());
  const int channels = dense.channels();
  const std::size_t num_cells = dense.num_cells();

  std::vector<CorrelationMap> maps(descriptors.size());
  for (auto& map : maps) {
    map.width = dense.width();
    map.height = dense.height();
    map.values.resize(num_cells);
  }
  if (descriptors.empty()) return maps;

  const std::size_t num_blocks = (descriptors.size() + kLanes - 1) / kLanes;
  const std::size_t block_stride = static_cast<std::size_t>(channels) * kLanes;
  std::vector<double> packed(num_blocks * block_stride, 0.0);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    double* block = packed.data() + (i / kLanes) * block_stride;
    const auto& values = descriptors[i].values;
    for (int c = 0; c < channels; ++c) {
      block[static_cast<std::size_t>(c) * kLanes + i % kLanes] = values[c];
    }
  }

  const float* grid = dense.data().data();
  const std::size_t num_tasks = (num_cells + kCellsPerTask - 1) / kCellsPerTask;
  ParallelFor(0, num_tasks, 1, [&](std::size_t task) {
    const std::size_t begin = task * kCellsPerTask;
    const std::size_t end = std::min(num_cells, begin + kCellsPerTask);
    // Converting a tile to f64 pays off once it is reused by a few blocks.
    const bool convert = num_blocks >= kConvertMinBlocks;
    std::vector<double> tile(convert ? static_cast<std::size_t>(channels) * kRows : 0);
    double acc[kRows][kLanes];
    auto run = [&]<int Rows>(std::size_t cell) {
      const float* src = grid + cell * static_cast<std::size_t>(channels);
      if (convert) {
        for (int r = 0; r < Rows; ++r) {
          for (int c = 0; c < channels; ++c) {
            tile[static_cast<std::size_t>(c) * Rows + r] =
                src[static_cast<std::size_t>(r) * channels + c];
          }
        }
      }
      for (std::size_t b = 0; b < num_blocks; ++b) {
        const double* block = packed.data() + b * block_stride;
        if (convert) {
          DotTile<Rows>(tile.data(), Rows, 1, block, channels, acc);
        } else {
          DotTile<Rows>(src, 1, static_cast<std::size_t>(channels), block, channels, acc);
        }
        const std::size_t lanes =
            std::min<std::size_t>(kLanes, descriptors.size() - b * kLanes);
        for (std::size_t j = 0; j < lanes; ++j) {
          float* out = maps[b * kLanes + j].values.data() + cell;
          for (int r = 0; r < Rows; ++r) out[r] = static_cast<float>(acc[r][j]);
        }
      }
    };
    std::size_t cell = begin;
    for (; cell + kRows <= end; cell += kRows) run.template operator()<kRows>(cell);
    for (; cell < end; ++cell) run.template operator()<1>(cell);
  });
  return maps;
}

CorrelationMap Correlate(const FeatureGrid& dense, const SparseDescriptor& d) {
  return std::move(CorrelateBatch(dense, std::span(&d, 1)).front());
}

Peak ArgmaxPeak(const CorrelationMap& map) {
  S2D_CHECK(!map.values.empty(), ErrorCode::kInvalidArgument,
            "correlation map is empty");
  const float* v = map.values.data();
  const std::size_t n = map.values.size();
  const float max = ChunkMax(v, n);
  std::size_t best = 0;
  // NaN-free maps find the maximum by value; otherwise fall back to a scan.
  while (best < n && !(v[best] == max)) ++best;
  if (best == n) {
    best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i] > v[best]) best = i;
    }
  }
  return {static_cast<int>(best % map.width), static_cast<int>(best / map.width),
          map.values[best]};
}

float QuantileValue(const CorrelationMap& map, double fraction) {
  S2D_CHECK(!map.values.empty(), ErrorCode::kInvalidArgument,
            "correlation map is empty");
  S2D_CHECK(fraction >= 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument,
            "fraction must lie in [0, 1]");
  const std::size_t n = map.values.size();
  const auto rank = std::min<std::size_t>(
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))),
      n - 1);
  if (rank == 0) return ArgmaxPeak(map).value;
  // Group g holds the strided elements g, g + G, g + 2G, ... of the first
  // kGroupSize * G values; the remaining tail forms one extra group.
  const std::size_t groups = n / kGroupSize;
  if ((rank + 1) * 4 <= groups) {
    // The rank-th largest group maximum is a lower bound for the answer,
    // since the rank + 1 groups reaching it each hold an element at least as
    // large. Only groups whose maximum reaches the bound hold candidates.
    const float* v = map.values.data();
    std::vector<float> maxima(v, v + groups);
    for (std::size_t r = 1; r < kGroupSize; ++r) {
      const float* row = v + r * groups;
      for (std::size_t g = 0; g < groups; ++g) {
        maxima[g] = row[g] > maxima[g] ? row[g] : maxima[g];
      }
    }
    const std::size_t tail = groups * kGroupSize;
    if (tail < n) maxima.push_back(ChunkMax(v + tail, n - tail));

    std::vector<float> order = maxima;
    std::nth_element(order.begin(), order.begin() + rank, order.end(),
                     std::greater<float>());
    const float bound = order[rank];
    std::vector<float> candidates;
    for (std::size_t g = 0; g < groups; ++g) {
      if (!(maxima[g] >= bound)) continue;
      for (std::size_t r = 0; r < kGroupSize; ++r) {
        const float x = v[r * groups + g];
        if (x >= bound) candidates.push_back(x);
      }
    }
    for (std::size_t i = tail; i < n; ++i) {
      if (v[i] >= bound) candidates.push_back(v[i]);
    }
    std::nth_element(candidates.begin(), candidates.begin() + rank, candidates.end(),
                     std::greater<float>());
    return candidates[rank];
  }
  std::vector<float> scratch = map.values;
  std::nth_element(scratch.begin(), scratch.begin() + rank, scratch.end(),
                   std::greater<float>());
  return scratch[rank];
}

RatioTestResult RatioTest(double peak, double quantile,
                          const RatioTestConfig& cfg) {
  S2D_CHECK(cfg.IsValid(), ErrorCode::kInvalidArgument,
            "ratio test needs alpha > 0 and fraction in [0, 1]");
  constexpr double kTiny = 1e-12;
  RatioTestResult result;
  if (std::abs(quantile) < kTiny) {
    // Vanishing denominator: treated as an infinite ratio when the peak is
    // positive.
    result.accepted = peak > kTiny;
    const double inf = std::numeric_limits<double>::infinity();
    result.ratio = peak > kTiny ? inf : (peak < -kTiny ? -inf : 0.0);
    return result;
  }
  result.ratio = peak / quantile;
  result.accepted = result.ratio > cfg.alpha;
  return result;
}

RatioTestResult RatioTest(const CorrelationMap& map, const RatioTestConfig& cfg) {
  return RatioTest(ArgmaxPeak(map).value, QuantileValue(map, cfg.fraction), cfg);
}

std::vector<MatchCandidate> MatchReference(
    const FeatureGrid& dense, std::span<const SparseDescriptor> sparse,
    std::span<const Landmark> landmarks, const ImageSize& image,
    const RatioTestConfig& cfg, const MatchOptions& options) {
  S2D_CHECK(sparse.size() == landmarks.size(), ErrorCode::kLengthMismatch,
            "got " + std::to_string(sparse.size()) + " descriptors and " +
                std::to_string(landmarks.size()) + " landmarks");
  S2D_CHECK(cfg.IsValid(), ErrorCode::kInvalidArgument,
            "ratio test needs alpha > 0 and fraction in [0, 1]");
  S2D_CHECK(image.width >= 1 && image.height >= 1, ErrorCode::kInvalidArgument,
            "image size must be positive");
  for (const auto& d : sparse) CheckChannels(dense, d.values.size());

  std::vector<MatchCandidate> out(sparse.size());
  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  for (std::size_t start = 0; start < sparse.size(); start += batch) {
    const std::size_t count = std::min(batch, sparse.size() - start);
    const auto maps = CorrelateBatch(dense, sparse.subspan(start, count));
    ParallelFor(0, count, 1, [&](std::size_t i) {
      const auto& map = maps[i];
      const Peak peak = ArgmaxPeak(map);
      const float quantile = QuantileValue(map, cfg.fraction);
      const RatioTestResult test = RatioTest(peak.value, quantile, cfg);

      double gx = peak.x;
      double gy = peak.y;
      if (options.subpixel_peak) {
        const auto at = [&](int x, int y) {
          return static_cast<double>(map.values[static_cast<std::size_t>(y) * map.width + x]);
        };
        if (peak.x > 0 && peak.x + 1 < map.width) {
          gx += ParabolicOffset(at(peak.x - 1, peak.y), peak.value,
                                at(peak.x + 1, peak.y));
        }
        if (peak.y > 0 && peak.y + 1 < map.height) {
          gy += ParabolicOffset(at(peak.x, peak.y - 1), peak.value,
                                at(peak.x, peak.y + 1));
        }
      }

      auto& cand = out[start + i];
      cand.keypoint_index = static_cast<int>(start + i);
      cand.query_pixel.x = std::clamp(GridToImage(gx, image.width, map.width),
                                      0.0, image.width - 1.0);
      cand.query_pixel.y = std::clamp(GridToImage(gy, image.height, map.height),
                                      0.0, image.height - 1.0);
      cand.peak_score = peak.value;
      cand.ratio = test.ratio;
      cand.accepted = test.accepted;
      cand.landmark = landmarks[start + i];
    });
  }
  return out;
}

}  // namespace s2d
