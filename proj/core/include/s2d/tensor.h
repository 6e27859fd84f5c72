#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "s2d/geometry.h"

namespace s2d {

struct ImageSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Dense W x H x C grid of f32 descriptors, row-major and channel-last:
// index = (y * width + x) * channels + c.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  // Zero-initialized grid.
  FeatureGrid(int width, int height, int channels);
  FeatureGrid(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t num_cells() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  std::span<const float> Cell(int x, int y) const;
  std::span<float> MutableCell(int x, int y);
  std::span<const float> Cell(std::size_t index) const;
  std::span<float> MutableCell(std::size_t index);

  float at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Ordered layer tensors (highest resolution first) plus the source image size.
struct LayerStack {
  std::vector<FeatureGrid> layers;
  ImageSize image;
};

// Hypercolumn at one reference keypoint. Unit L2 norm or all zeros.
struct SparseDescriptor {
  std::vector<float> values;
  int keypoint_index = 0;
};

enum class SampleMode {
  kBilinear,
  // Value of the cell containing the keypoint, no interpolation.
  kNearest,
};

// Half-pixel-center resampling with edge clamping, channels independent.
FeatureGrid BilinearResize(const FeatureGrid& grid, int new_width,
                           int new_height);

// Resizes every layer to the first layer's resolution, concatenates along
// channels in stack order and L2-normalizes each pixel (zero stays zero).
FeatureGrid AssembleHypercolumn(const LayerStack& stack);

// Image pixel -> continuous grid coordinate along one axis:
// g = (p + 0.5) * grid_extent / image_extent - 0.5.
double ImageToGrid(double p, int image_extent, int grid_extent);
// Inverse of ImageToGrid.
double GridToImage(double g, int image_extent, int grid_extent);
// Cell whose footprint contains image coordinate p, clamped to the grid.
int ContainingCell(double p, int image_extent, int grid_extent);

// Descriptors at `keypoints`, renormalized to unit norm. Throws
// KeypointOutOfBounds for keypoints outside [0, W) x [0, H).
std::vector<SparseDescriptor> SampleSparse(
    const FeatureGrid& grid, std::span<const PixelPoint> keypoints,
    const ImageSize& image, SampleMode mode = SampleMode::kBilinear);

// In-place L2 normalization with f64 accumulation. Returns the original norm.
double NormalizeInPlace(std::span<float> values);
double L2Norm(std::span<const float> values);

}  // namespace s2d
