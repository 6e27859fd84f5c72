#include "s2d/tensor.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "s2d/error.h"
#include "s2d/parallel.h"

namespace s2d {
namespace {

void CheckDims(int width, int height, int channels) {
  S2D_CHECK(width >= 1 && height >= 1 && channels >= 1,
            ErrorCode::kInvalidArgument,
            "feature grid dimensions must be positive, got " +
                std::to_string(width) + "x" + std::to_string(height) + "x" +
                std::to_string(channels));
}

struct Tap {
  int i0 = 0;
  int i1 = 0;
  double w1 = 0.0;  // weight of i1; i0 gets 1 - w1
};

Tap MakeTap(double g, int extent) {
  g = std::clamp(g, 0.0, static_cast<double>(extent - 1));
  Tap tap;
  tap.i0 = static_cast<int>(std::floor(g));
  tap.i1 = std::min(tap.i0 + 1, extent - 1);
  tap.w1 = g - tap.i0;
  return tap;
}

void Interpolate(const FeatureGrid& grid, const Tap& tx, const Tap& ty,
                 std::span<float> out) {
  const auto c00 = grid.Cell(tx.i0, ty.i0);
  const auto c10 = grid.Cell(tx.i1, ty.i0);
  const auto c01 = grid.Cell(tx.i0, ty.i1);
  const auto c11 = grid.Cell(tx.i1, ty.i1);
  const double wx0 = 1.0 - tx.w1;
  const double wy0 = 1.0 - ty.w1;
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double top = wx0 * c00[c] + tx.w1 * c10[c];
    const double bottom = wx0 * c01[c] + tx.w1 * c11[c];
    out[c] = static_cast<float>(wy0 * top + ty.w1 * bottom);
  }
}

}  // namespace

FeatureGrid::FeatureGrid(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  CheckDims(width, height, channels);
  data_.assign(num_cells() * static_cast<std::size_t>(channels), 0.0f);
}

FeatureGrid::FeatureGrid(int width, int height, int channels,
                         std::vector<float> data)
    : width_(width), height_(height), channels_(channels),
      data_(std::move(data)) {
  CheckDims(width, height, channels);
  S2D_CHECK(data_.size() == num_cells() * static_cast<std::size_t>(channels),
            ErrorCode::kLengthMismatch, "feature grid payload size mismatch");
}

std::span<const float> FeatureGrid::Cell(int x, int y) const {
  return Cell(static_cast<std::size_t>(y) * width_ + x);
}

std::span<const float> FeatureGrid::Cell(std::size_t index) const {
  return std::span<const float>(data_).subspan(index * channels_, channels_);
}

std::span<float> FeatureGrid::MutableCell(std::size_t index) {
  return std::span<float>(data_).subspan(index * channels_, channels_);
}

std::span<float> FeatureGrid::MutableCell(int x, int y) {
  const std::size_t index = static_cast<std::size_t>(y) * width_ + x;
  return std::span<float>(data_).subspan(index * channels_, channels_);
}

double L2Norm(std::span<const float> values) {
  double sum = 0.0;
  for (const float v : values) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

double NormalizeInPlace(std::span<float> values) {
  const double norm = L2Norm(values);
  if (norm > 0.0) {
    for (float& v : values) v = static_cast<float>(v / norm);
  }
  return norm;
}

double ImageToGrid(double p, int image_extent, int grid_extent) {
  return (p + 0.5) * (static_cast<double>(grid_extent) / image_extent) - 0.5;
}

double GridToImage(double g, int image_extent, int grid_extent) {
  return (g + 0.5) * (static_cast<double>(image_extent) / grid_extent) - 0.5;
}

int ContainingCell(double p, int image_extent, int grid_extent) {
  const double g = ImageToGrid(p, image_extent, grid_extent);
  return std::clamp(static_cast<int>(std::floor(g + 0.5)), 0, grid_extent - 1);
}

FeatureGrid BilinearResize(const FeatureGrid& grid, int new_width,
                           int new_height) {
  S2D_CHECK(new_width >= 1 && new_height >= 1, ErrorCode::kInvalidArgument,
            "resize target must be at least 1x1");
  FeatureGrid out(new_width, new_height, grid.channels());
  std::vector<Tap> x_taps(new_width);
  for (int x = 0; x < new_width; ++x) {
    x_taps[x] = MakeTap(ImageToGrid(x, new_width, grid.width()), grid.width());
  }
  ParallelFor(0, new_height, 4, [&](std::size_t y) {
    const Tap ty = MakeTap(
        ImageToGrid(static_cast<double>(y), new_height, grid.height()),
        grid.height());
    for (int x = 0; x < new_width; ++x) {
      Interpolate(grid, x_taps[x], ty, out.MutableCell(x, static_cast<int>(y)));
    }
  });
  return out;
}

FeatureGrid AssembleHypercolumn(const LayerStack& stack) {
  S2D_CHECK(!stack.layers.empty(), ErrorCode::kInvalidArgument,
            "layer stack is empty");
  const int width = stack.layers.front().width();
  const int height = stack.layers.front().height();
  int channels = 0;
  for (const auto& layer : stack.layers) {
    S2D_CHECK(layer.width() <= width && layer.height() <= height,
              ErrorCode::kInvalidArgument,
              "first layer must have the highest resolution in the stack");
    channels += layer.channels();
  }

  std::vector<FeatureGrid> resized;
  resized.reserve(stack.layers.size());
  for (const auto& layer : stack.layers) {
    if (layer.width() == width && layer.height() == height) {
      resized.push_back(layer);
    } else {
      resized.push_back(BilinearResize(layer, width, height));
    }
  }

  FeatureGrid out(width, height, channels);
  ParallelFor(0, out.num_cells(), 256, [&](std::size_t cell) {
    const int x = static_cast<int>(cell % width);
    const int y = static_cast<int>(cell / width);
    auto dst = out.MutableCell(x, y);
    std::size_t offset = 0;
    for (const auto& layer : resized) {
      const auto src = layer.Cell(cell);
      std::copy(src.begin(), src.end(), dst.begin() + offset);
      offset += src.size();
    }
    NormalizeInPlace(dst);
  });
  return out;
}

std::vector<SparseDescriptor> SampleSparse(const FeatureGrid& grid,
                                           std::span<const PixelPoint> keypoints,
                                           const ImageSize& image,
                                           SampleMode mode) {
  S2D_CHECK(image.width >= 1 && image.height >= 1, ErrorCode::kInvalidArgument,
            "image size must be positive");
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& kp = keypoints[i];
    S2D_CHECK(kp.x >= 0.0 && kp.x < image.width && kp.y >= 0.0 &&
                  kp.y < image.height,
              ErrorCode::kKeypointOutOfBounds,
              "keypoint " + std::to_string(i) + " outside the image");
  }

  std::vector<SparseDescriptor> out(keypoints.size());
  ParallelFor(0, keypoints.size(), 64, [&](std::size_t i) {
    const auto& kp = keypoints[i];
    auto& desc = out[i];
    desc.keypoint_index = static_cast<int>(i);
    desc.values.resize(grid.channels());
    if (mode == SampleMode::kNearest) {
      const auto cell =
          grid.Cell(ContainingCell(kp.x, image.width, grid.width()),
                    ContainingCell(kp.y, image.height, grid.height()));
      std::copy(cell.begin(), cell.end(), desc.values.begin());
    } else {
      const Tap tx = MakeTap(ImageToGrid(kp.x, image.width, grid.width()),
                             grid.width());
      const Tap ty = MakeTap(ImageToGrid(kp.y, image.height, grid.height()),
                             grid.height());
      Interpolate(grid, tx, ty, desc.values);
    }
    NormalizeInPlace(desc.values);
  });
  return out;
}

}  // namespace s2d
