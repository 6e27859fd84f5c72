#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "s2d/error.h"
#include "s2d/tensor.h"
#include "test_util.h"

namespace s2d {
namespace {

TEST(FeatureGridTest, RejectsWrongDataLength) {
  EXPECT_THROW(FeatureGrid(2, 2, 3, std::vector<float>(11)), Error);
  const FeatureGrid g(2, 2, 3, std::vector<float>(12, 1.0f));
  EXPECT_EQ(g.num_cells(), 4u);
  EXPECT_EQ(g.Cell(1, 1).size(), 3u);
}

TEST(FeatureGridTest, ChannelLastIndexing) {
  std::vector<float> data(2 * 3 * 4);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i);
  const FeatureGrid g(2, 3, 4, data);
  // index = (y * width + x) * channels + c
  EXPECT_EQ(g.at(1, 2, 3), static_cast<float>((2 * 2 + 1) * 4 + 3));
  EXPECT_EQ(g.Cell(1, 2)[0], g.Cell(std::size_t{5})[0]);
}

TEST(BilinearResizeTest, SameSizeIsBitIdentical) {
  std::mt19937_64 rng(1);
  const FeatureGrid g = testing::RandomGrid(rng, 7, 5, 3, false);
  EXPECT_EQ(BilinearResize(g, 7, 5), g);
}

TEST(BilinearResizeTest, SingleCellExtendsToConstant) {
  const FeatureGrid g(1, 1, 2, {0.25f, -3.0f});
  const FeatureGrid out = BilinearResize(g, 3, 3);
  for (std::size_t i = 0; i < out.num_cells(); ++i) {
    EXPECT_EQ(out.Cell(i)[0], 0.25f);
    EXPECT_EQ(out.Cell(i)[1], -3.0f);
  }
}

TEST(BilinearResizeTest, TwoToFourHalfPixelCenters) {
  const FeatureGrid g(2, 1, 1, {0.0f, 1.0f});
  const FeatureGrid out = BilinearResize(g, 4, 1);
  const float expected[] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int x = 0; x < 4; ++x) EXPECT_FLOAT_EQ(out.at(x, 0, 0), expected[x]);
}

TEST(BilinearResizeTest, PreservesConstantsAndBounds) {
  std::mt19937_64 rng(2);
  FeatureGrid constant(5, 4, 2);
  for (std::size_t i = 0; i < constant.num_cells(); ++i) {
    constant.MutableCell(i)[0] = 0.3f;
    constant.MutableCell(i)[1] = -0.7f;
  }
  const FeatureGrid up = BilinearResize(constant, 13, 9);
  for (std::size_t i = 0; i < up.num_cells(); ++i) {
    EXPECT_EQ(up.Cell(i)[0], 0.3f);
    EXPECT_EQ(up.Cell(i)[1], -0.7f);
  }

  const FeatureGrid g = testing::RandomGrid(rng, 6, 5, 3, false);
  const FeatureGrid r = BilinearResize(g, 17, 11);
  for (int c = 0; c < 3; ++c) {
    float lo = 1e30f, hi = -1e30f;
    for (std::size_t i = 0; i < g.num_cells(); ++i) {
      lo = std::min(lo, g.Cell(i)[c]);
      hi = std::max(hi, g.Cell(i)[c]);
    }
    for (std::size_t i = 0; i < r.num_cells(); ++i) {
      EXPECT_GE(r.Cell(i)[c], lo - 1e-6f);
      EXPECT_LE(r.Cell(i)[c], hi + 1e-6f);
    }
  }
}

TEST(AssembleHypercolumnTest, SingleUnitLayerIsUnchanged) {
  std::mt19937_64 rng(3);
  const FeatureGrid g = testing::RandomGrid(rng, 4, 3, 5);
  const FeatureGrid h = AssembleHypercolumn({{g}, {16, 12}});
  ASSERT_EQ(h.channels(), 5);
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    EXPECT_NEAR(h.data()[i], g.data()[i], 1e-6f);
  }
}

TEST(AssembleHypercolumnTest, ThreeFourFive) {
  const FeatureGrid a(1, 1, 1, {3.0f});
  const FeatureGrid b(1, 1, 1, {4.0f});
  const FeatureGrid h = AssembleHypercolumn({{a, b}, {1, 1}});
  ASSERT_EQ(h.channels(), 2);
  EXPECT_FLOAT_EQ(h.at(0, 0, 0), 0.6f);
  EXPECT_FLOAT_EQ(h.at(0, 0, 1), 0.8f);
}

TEST(AssembleHypercolumnTest, VggLayerWidthsSumTo2304) {
  // Strides mimic conv3_3, conv4_x and conv5_x on a 32x32 input.
  std::mt19937_64 rng(4);
  LayerStack stack;
  stack.image = {32, 32};
  stack.layers.push_back(testing::RandomGrid(rng, 8, 8, 256, false));
  stack.layers.push_back(testing::RandomGrid(rng, 4, 4, 512, false));
  stack.layers.push_back(testing::RandomGrid(rng, 4, 4, 512, false));
  stack.layers.push_back(testing::RandomGrid(rng, 2, 2, 512, false));
  stack.layers.push_back(testing::RandomGrid(rng, 2, 2, 512, false));
  const FeatureGrid h = AssembleHypercolumn(stack);
  EXPECT_EQ(h.channels(), 2304);
  EXPECT_EQ(h.width(), 8);
  EXPECT_EQ(h.height(), 8);
  for (std::size_t i = 0; i < h.num_cells(); ++i) {
    EXPECT_NEAR(L2Norm(h.Cell(i)), 1.0, 1e-6);
  }
}

TEST(AssembleHypercolumnTest, ZeroPixelsStayZero) {
  const FeatureGrid a(2, 1, 2, {0.0f, 0.0f, 1.0f, 1.0f});
  const FeatureGrid h = AssembleHypercolumn({{a}, {2, 1}});
  EXPECT_EQ(L2Norm(h.Cell(0, 0)), 0.0);
  EXPECT_NEAR(L2Norm(h.Cell(1, 0)), 1.0, 1e-6);
}

TEST(AssembleHypercolumnTest, RejectsEmptyStackAndLargerLaterLayer) {
  EXPECT_THROW(AssembleHypercolumn({{}, {4, 4}}), Error);
  const FeatureGrid small(2, 2, 1);
  const FeatureGrid big(4, 4, 1);
  EXPECT_THROW(AssembleHypercolumn({{small, big}, {8, 8}}), Error);
}

TEST(CoordinateTest, CellCenterRoundTrip) {
  // 512-pixel image, stride 4.
  for (int cell = 0; cell < 128; ++cell) {
    const double px = GridToImage(cell, 512, 128);
    EXPECT_NEAR(ImageToGrid(px, 512, 128), cell, 1e-12);
    EXPECT_EQ(ContainingCell(px, 512, 128), cell);
  }
  EXPECT_DOUBLE_EQ(GridToImage(0.0, 512, 128), 1.5);
  EXPECT_EQ(ContainingCell(0.0, 512, 128), 0);
  EXPECT_EQ(ContainingCell(511.9, 512, 128), 127);
}

TEST(SampleSparseTest, CellCenterNeedsNoInterpolation) {
  FeatureGrid g(6, 6, 8);
  for (std::size_t i = 0; i < g.num_cells(); ++i) g.MutableCell(i)[0] = 1.0f;
  auto cell = g.MutableCell(2, 3);
  std::fill(cell.begin(), cell.end(), 0.0f);
  cell[5] = 1.0f;
  // Image 24x24, stride 4: center of cell (2, 3) is pixel (9.5, 13.5).
  const std::vector<PixelPoint> kp = {{9.5, 13.5}};
  const auto d = SampleSparse(g, kp, {24, 24});
  ASSERT_EQ(d.size(), 1u);
  for (int c = 0; c < 8; ++c) EXPECT_FLOAT_EQ(d[0].values[c], c == 5 ? 1.0f : 0.0f);
}

TEST(SampleSparseTest, OutOfBoundsKeypointThrows) {
  const FeatureGrid g(4, 4, 2);
  const std::vector<PixelPoint> kp = {{-1.0, 0.0}};
  try {
    SampleSparse(g, kp, {16, 16});
    FAIL() << "expected KeypointOutOfBounds";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKeypointOutOfBounds);
  }
  const std::vector<PixelPoint> edge = {{16.0, 3.0}};
  EXPECT_THROW(SampleSparse(g, edge, {16, 16}), Error);
}

TEST(SampleSparseTest, ConstantGridGivesConstantDescriptor) {
  std::mt19937_64 rng(5);
  const auto v = testing::RandomUnitVector(rng, 16);
  FeatureGrid g(10, 8, 16);
  for (std::size_t i = 0; i < g.num_cells(); ++i) {
    std::copy(v.begin(), v.end(), g.MutableCell(i).begin());
  }
  std::uniform_real_distribution<double> x(0.0, 40.0), y(0.0, 32.0);
  std::vector<PixelPoint> kps;
  for (int i = 0; i < 100; ++i) kps.push_back({x(rng), y(rng)});
  for (const auto mode : {SampleMode::kBilinear, SampleMode::kNearest}) {
    const auto d = SampleSparse(g, kps, {40, 32}, mode);
    ASSERT_EQ(d.size(), 100u);
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_EQ(d[i].keypoint_index, static_cast<int>(i));
      for (int c = 0; c < 16; ++c) EXPECT_NEAR(d[i].values[c], v[c], 1e-6f);
    }
  }
}

TEST(SampleSparseTest, DescriptorsAreUnitOrZero) {
  std::mt19937_64 rng(6);
  const FeatureGrid g = testing::RandomGrid(rng, 12, 9, 32, false);
  std::uniform_real_distribution<double> x(0.0, 48.0), y(0.0, 36.0);
  std::vector<PixelPoint> kps;
  for (int i = 0; i < 200; ++i) kps.push_back({x(rng), y(rng)});
  for (const auto& d : SampleSparse(g, kps, {48, 36})) {
    EXPECT_NEAR(L2Norm(d.values), 1.0, 1e-6);
  }
  const FeatureGrid zero(3, 3, 4);
  const std::vector<PixelPoint> kp = {{1.0, 1.0}};
  EXPECT_EQ(L2Norm(SampleSparse(zero, kp, {12, 12})[0].values), 0.0);
}

TEST(NormalizeTest, ReturnsOriginalNorm) {
  std::vector<float> v = {3.0f, 0.0f, 4.0f};
  EXPECT_DOUBLE_EQ(NormalizeInPlace(v), 5.0);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[2], 0.8f);
  std::vector<float> z(4, 0.0f);
  EXPECT_EQ(NormalizeInPlace(z), 0.0);
  EXPECT_EQ(z, std::vector<float>(4, 0.0f));
}

}  // namespace
}  // namespace s2d
