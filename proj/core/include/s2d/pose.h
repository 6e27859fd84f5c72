#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "s2d/geometry.h"

namespace s2d {

struct Correspondence2D3D {
  PixelPoint pixel;  // query image coordinates
  Landmark landmark = Landmark::Zero();
};

struct RansacConfig {
  double inlier_threshold_px = 12.0;
  int max_iterations = 5000;
  double confidence = 0.99;
  int min_inliers = 15;
  std::uint64_t seed = 0;
  // Least-squares polish of the winning hypothesis on its inliers.
  bool refine = true;

  bool IsValid() const {
    return inlier_threshold_px > 0.0 && confidence > 0.0 && confidence < 1.0 &&
           min_inliers >= 4 && max_iterations >= 1;
  }
};

struct PoseEstimate {
  Pose pose;
  std::vector<int> inlier_indices;  // ascending
  int iterations_run = 0;
  double inlier_error_px = 0.0;     // sum of inlier reprojection errors
};

// Real roots of sum_i coeffs[i] * x^i via companion-matrix eigenvalues,
// each polished by Newton iterations. Leading zero coefficients are dropped.
std::vector<double> SolvePolynomialRealRoots(std::span<const double> coeffs);

// Minimal absolute pose from three correspondences: up to four poses, each
// reprojecting the three landmarks within 1e-6 px. An empty result means no
// real solution. Throws DegenerateConfiguration for collinear or coincident
// landmarks.
std::vector<Pose> SolveP3P(const Correspondence2D3D& c1,
                           const Correspondence2D3D& c2,
                           const Correspondence2D3D& c3, const Intrinsics& k);

// Pixel distance between the projected landmark and the observation;
// +infinity when the landmark is behind the camera.
double ReprojectionError(const Pose& pose, const Intrinsics& k,
                         const Correspondence2D3D& c);

// Indices with reprojection error <= threshold; `total_error` gets their sum.
std::vector<int> FindInliers(const Pose& pose, const Intrinsics& k,
                             std::span<const Correspondence2D3D> corrs,
                             double threshold, double* total_error = nullptr);

// Seeded P3P-RANSAC. Returns nullopt when the best hypothesis has fewer than
// min_inliers inliers. Throws TooFewCorrespondences for fewer than 4 inputs.
std::optional<PoseEstimate> RansacPnp(std::span<const Correspondence2D3D> corrs,
                                      const Intrinsics& k,
                                      const RansacConfig& cfg);

// Three distinct indices in [0, n) drawn as a pure function of (seed, iteration).
std::array<int, 3> SampleTriple(std::uint64_t seed, std::uint64_t iteration, int n);

// 6-vector pose increment: [rotation (axis-angle, left), translation].
using PoseDelta = Eigen::Matrix<double, 6, 1>;

// pose <- (exp(w) R, exp(w) t + v) for delta = [w; v], i.e. a left update of
// the world-to-camera transform.
Pose Retract(const Pose& pose, const PoseDelta& delta);

// d(pixel)/d(delta) at delta = 0. Requires the landmark in front.
Eigen::Matrix<double, 2, 6> ReprojectionJacobian(const Pose& pose,
                                                 const Intrinsics& k,
                                                 const Landmark& landmark);

struct RefineOptions {
  int max_iterations = 100;
  double min_cost_decrease = 1e-10;
};

struct RefineResult {
  Pose pose;
  double initial_cost = 0.0;  // sum of squared reprojection errors
  double final_cost = 0.0;
  int iterations = 0;
  // The normal equations were rank deficient; `pose` is the unchanged input.
  bool singular = false;
};

// Levenberg-Marquardt on the total squared reprojection error. Never returns
// a pose with higher cost than the input. Throws TooFewCorrespondences for
// fewer than 4 inliers.
RefineResult RefinePose(const Pose& init,
                        std::span<const Correspondence2D3D> inliers,
                        const Intrinsics& k, const RefineOptions& options = {});

}  // namespace s2d
