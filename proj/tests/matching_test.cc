#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "s2d/error.h"
#include "s2d/matching.h"
#include "s2d/parallel.h"
#include "s2d/synth.h"
#include "test_util.h"

namespace s2d {
namespace {

CorrelationMap MapOf(int w, int h, std::vector<float> values) {
  return {w, h, std::move(values)};
}

SparseDescriptor Desc(std::vector<float> v, int index = 0) { return {std::move(v), index}; }

TEST(CorrelateTest, PlantedCellOverOrthogonalBackground) {
  // d = e0; background cells live in span(e1..e3).
  std::mt19937_64 rng(1);
  FeatureGrid g(5, 4, 4);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (std::size_t i = 0; i < g.num_cells(); ++i) {
    auto cell = g.MutableCell(i);
    cell[0] = 0.0f;
    for (int c = 1; c < 4; ++c) cell[c] = n(rng);
    NormalizeInPlace(cell);
  }
  auto planted = g.MutableCell(3, 2);
  std::fill(planted.begin(), planted.end(), 0.0f);
  planted[0] = 1.0f;
  const CorrelationMap m = Correlate(g, Desc({1, 0, 0, 0}));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      EXPECT_EQ(m.values[y * 5 + x], (x == 3 && y == 2) ? 1.0f : 0.0f);
    }
  }
}

TEST(CorrelateTest, ZeroDescriptorGivesZeroMap) {
  std::mt19937_64 rng(2);
  const FeatureGrid g = testing::RandomGrid(rng, 6, 6, 9);
  const CorrelationMap m = Correlate(g, Desc(std::vector<float>(9, 0.0f)));
  for (const float v : m.values) EXPECT_EQ(v, 0.0f);
}

TEST(CorrelateTest, MatchesOracle) {
  std::mt19937_64 rng(3);
  const FeatureGrid g = testing::RandomGrid(rng, 16, 12, 64);
  for (int i = 0; i < 10; ++i) {
    const auto d = Desc(testing::RandomUnitVector(rng, 64));
    const CorrelationMap fast = Correlate(g, d);
    const CorrelationMap slow = synth::OracleCorrelate(g, d);
    ASSERT_EQ(fast.values.size(), slow.values.size());
    for (std::size_t k = 0; k < fast.values.size(); ++k) {
      EXPECT_NEAR(fast.values[k], slow.values[k], 1e-6);
      EXPECT_LE(std::abs(fast.values[k]), 1.0f + 1e-6f);
    }
  }
}

TEST(CorrelateTest, BatchEqualsSingleCallsAcrossThreadCounts) {
  std::mt19937_64 rng(4);
  const FeatureGrid g = testing::RandomGrid(rng, 13, 7, 40);
  std::vector<SparseDescriptor> ds;
  for (int i = 0; i < 37; ++i) ds.push_back(Desc(testing::RandomUnitVector(rng, 40), i));
  SetNumThreads(1);
  const auto one = CorrelateBatch(g, ds);
  SetNumThreads(4);
  const auto four = CorrelateBatch(g, ds);
  SetNumThreads(0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(one[i].values, four[i].values);
    EXPECT_EQ(one[i].values, Correlate(g, ds[i]).values);
  }
}

TEST(CorrelateTest, ChannelMismatch) {
  const FeatureGrid g(2, 2, 3);
  try {
    Correlate(g, Desc({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChannelMismatch);
  }
}

TEST(ArgmaxPeakTest, Examples) {
  const Peak single = ArgmaxPeak(MapOf(1, 1, {0.7f}));
  EXPECT_EQ(single.x, 0);
  EXPECT_EQ(single.y, 0);
  EXPECT_FLOAT_EQ(single.value, 0.7f);

  const Peak constant = ArgmaxPeak(MapOf(3, 2, std::vector<float>(6, 0.2f)));
  EXPECT_EQ(constant.x, 0);
  EXPECT_EQ(constant.y, 0);

  const Peak tie = ArgmaxPeak(MapOf(3, 2, {0, 0.5f, 0, 0.5f, 0, 0}));
  EXPECT_EQ(tie.x, 1);
  EXPECT_EQ(tie.y, 0);
}

TEST(ArgmaxPeakTest, MatchesFullScan) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> level(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    CorrelationMap m = MapOf(100, 80, std::vector<float>(8000));
    // Coarse levels make ties common.
    for (auto& v : m.values) v = level(rng) / 50.0f;
    std::size_t best = 0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.values[i] > m.values[best]) best = i;
    }
    const Peak p = ArgmaxPeak(m);
    EXPECT_EQ(static_cast<std::size_t>(p.y * 100 + p.x), best);
    EXPECT_EQ(p.value, m.values[best]);
  }
}

TEST(QuantileValueTest, Examples) {
  const CorrelationMap m = MapOf(4, 1, {4, 1, 3, 2});
  EXPECT_EQ(QuantileValue(m, 0.5), 2.0f);
  EXPECT_EQ(QuantileValue(m, 0.0), 4.0f);
  EXPECT_EQ(QuantileValue(m, 1.0), 1.0f);  // rank clamped to N - 1
}

TEST(QuantileValueTest, MatchesFullSortAndIsMonotone) {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> n(0.0f, 0.3f);
  std::uniform_int_distribution<int> side(1, 200);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = side(rng), h = side(rng);
    CorrelationMap m = MapOf(w, h, std::vector<float>(static_cast<std::size_t>(w) * h));
    for (auto& v : m.values) v = n(rng);
    if (trial % 3 == 0) {
      for (auto& v : m.values) v = std::round(v * 10.0f) / 10.0f;
    }
    std::vector<float> sorted = m.values;
    std::sort(sorted.begin(), sorted.end(), std::greater<float>());
    for (const double f : {0.0, 0.006, 0.12, frac(rng), 1.0}) {
      const auto rank = std::min<std::size_t>(
          static_cast<std::size_t>(std::floor(f * sorted.size())), sorted.size() - 1);
      ASSERT_EQ(QuantileValue(m, f), sorted[rank]) << "w=" << w << " h=" << h << " f=" << f;
    }
    EXPECT_EQ(QuantileValue(m, 0.0), ArgmaxPeak(m).value);
    float previous = QuantileValue(m, 0.0);
    for (double f = 0.05; f <= 1.0; f += 0.05) {
      const float q = QuantileValue(m, f);
      EXPECT_LE(q, previous);
      previous = q;
    }
  }
}

TEST(RatioTestTest, Examples) {
  const RatioTestConfig cfg{0.9, 0.006};
  const RatioTestResult a = RatioTest(1.0, 0.1, cfg);
  EXPECT_TRUE(a.accepted);
  EXPECT_DOUBLE_EQ(a.ratio, 10.0);

  const CorrelationMap m = MapOf(3, 1, {0.2f, 0.9f, 0.4f});
  const RatioTestResult b = RatioTest(m, {0.9, 0.0});
  EXPECT_TRUE(b.accepted);
  EXPECT_DOUBLE_EQ(b.ratio, 1.0);

  const RatioTestResult c = RatioTest(0.5, -0.1, cfg);
  EXPECT_FALSE(c.accepted);
  EXPECT_DOUBLE_EQ(c.ratio, -5.0);
}

TEST(RatioTestTest, VanishingDenominator) {
  const RatioTestConfig cfg{0.9, 0.5};
  EXPECT_TRUE(RatioTest(0.3, 0.0, cfg).accepted);
  EXPECT_TRUE(std::isinf(RatioTest(0.3, 0.0, cfg).ratio));
  EXPECT_FALSE(RatioTest(0.0, 0.0, cfg).accepted);
  EXPECT_FALSE(RatioTest(-0.3, 1e-13, cfg).accepted);
}

TEST(RatioTestTest, InvalidConfig) {
  EXPECT_THROW(RatioTest(1.0, 0.5, {0.0, 0.1}), Error);
  EXPECT_THROW(RatioTest(1.0, 0.5, {0.9, 1.5}), Error);
}

TEST(MatchReferenceTest, PlantedDescriptorsAreFound) {
  synth::SceneOptions so;
  so.num_refs = 2;
  so.num_queries = 1;
  const auto scene = synth::GenScene(42, so);
  synth::TensorOptions to;
  to.channels = 256;
  to.noise.background = synth::BackgroundMode::kOrthogonal;
  const auto tensors = synth::GenFeatureTensors(scene, to);
  const auto& q = tensors.queries[0];
  const auto& view = scene.queries[0];

  std::vector<SparseDescriptor> sparse;
  std::vector<Landmark> landmarks;
  std::vector<PixelPoint> truth;
  for (const int id : q.landmark_ids) {
    sparse.push_back(Desc(tensors.landmark_descriptors[id], static_cast<int>(sparse.size())));
    landmarks.push_back(scene.landmarks[id]);
    truth.push_back(Project(view.pose, view.intrinsics, scene.landmarks[id]));
  }
  const auto out = MatchReference(q.dense, sparse, landmarks, view.image, {0.9, 0.006});
  ASSERT_EQ(out.size(), sparse.size());
  const double stride = static_cast<double>(view.image.width) / q.dense.width();
  int exact = 0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    EXPECT_EQ(out[j].keypoint_index, static_cast<int>(j));
    EXPECT_EQ(out[j].landmark, landmarks[j]);
    EXPECT_GE(out[j].query_pixel.x, 0.0);
    EXPECT_LE(out[j].query_pixel.x, view.image.width - 1.0);
    EXPECT_TRUE(out[j].accepted);
    // Landmarks sharing a cell overwrite each other; the rest peak exactly.
    if (out[j].peak_score < 1.0f - 1e-6f) continue;
    ++exact;
    EXPECT_LE(std::abs(out[j].query_pixel.x - truth[j].x), stride / 2 + 1e-9);
    EXPECT_LE(std::abs(out[j].query_pixel.y - truth[j].y), stride / 2 + 1e-9);
  }
  EXPECT_GE(exact, static_cast<int>(0.9 * out.size()));
}

TEST(MatchReferenceTest, EmptyAndZeroInputs) {
  const FeatureGrid zero(8, 8, 4);
  EXPECT_TRUE(MatchReference(zero, {}, {}, {32, 32}, {}).empty());
  const std::vector<SparseDescriptor> sparse = {Desc({1, 0, 0, 0}), Desc({0, 0.6f, 0.8f, 0})};
  const std::vector<Landmark> lm(2, Landmark(1, 2, 3));
  const auto out = MatchReference(zero, sparse, lm, {32, 32}, {});
  ASSERT_EQ(out.size(), 2u);
  for (const auto& c : out) EXPECT_FALSE(c.accepted);
}

TEST(MatchReferenceTest, Errors) {
  const FeatureGrid g(4, 4, 3);
  const std::vector<SparseDescriptor> sparse = {Desc({1, 0, 0})};
  const std::vector<Landmark> two(2, Landmark::Zero());
  try {
    MatchReference(g, sparse, two, {16, 16}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
  const std::vector<SparseDescriptor> wrong = {Desc({1, 0})};
  const std::vector<Landmark> one(1, Landmark::Zero());
  try {
    MatchReference(g, wrong, one, {16, 16}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChannelMismatch);
  }
}

TEST(MatchReferenceTest, SubpixelPeakStaysWithinHalfCell) {
  std::mt19937_64 rng(7);
  const FeatureGrid g = testing::RandomGrid(rng, 16, 16, 16);
  std::vector<SparseDescriptor> sparse;
  for (int i = 0; i < 20; ++i) sparse.push_back(Desc(testing::RandomUnitVector(rng, 16), i));
  const std::vector<Landmark> lm(20, Landmark::Zero());
  MatchOptions integer;
  MatchOptions sub;
  sub.subpixel_peak = true;
  const auto a = MatchReference(g, sparse, lm, {64, 64}, {}, integer);
  const auto b = MatchReference(g, sparse, lm, {64, 64}, {}, sub);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(std::abs(a[i].query_pixel.x - b[i].query_pixel.x), 2.0 + 1e-9);
    EXPECT_LE(std::abs(a[i].query_pixel.y - b[i].query_pixel.y), 2.0 + 1e-9);
    EXPECT_EQ(a[i].accepted, b[i].accepted);
  }
}

}  // namespace
}  // namespace s2d
