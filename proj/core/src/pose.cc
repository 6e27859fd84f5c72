#include "s2d/pose.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "s2d/error.h"
#include "s2d/parallel.h"

namespace s2d {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSelfReprojectionTol = 1e-6;

// Coefficients in ascending order.
using Poly = std::vector<double>;

Poly Mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

Poly Add(const Poly& a, const Poly& b, double scale_b = 1.0) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += scale_b * b[i];
  return out;
}

Poly Scale(const Poly& a, double s) {
  Poly out = a;
  for (double& v : out) v *= s;
  return out;
}

double Eval(std::span<const double> p, double x, double* derivative) {
  double value = 0.0;
  double slope = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) {
    slope = slope * x + value;
    value = value * x + p[i];
  }
  if (derivative != nullptr) *derivative = slope;
  return value;
}

std::uint64_t SplitMix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int Bounded(std::uint64_t& state, int n) {
  __extension__ using Wide = unsigned __int128;
  const Wide wide = static_cast<Wide>(SplitMix64(state)) * static_cast<Wide>(n);
  return static_cast<int>(wide >> 64);
}

Matrix3d Hat(const Vector3d& v) {
  Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rigid transform with X_cam = R * X_world + t from three point pairs.
Pose AbsoluteOrientation(const std::array<Vector3d, 3>& world,
                         const std::array<Vector3d, 3>& cam) {
  const Vector3d world_mean = (world[0] + world[1] + world[2]) / 3.0;
  const Vector3d cam_mean = (cam[0] + cam[1] + cam[2]) / 3.0;
  Matrix3d cross = Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    cross += (world[i] - world_mean) * (cam[i] - cam_mean).transpose();
  }
  Eigen::JacobiSVD<Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d correction = Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) {
    correction(2, 2) = -1.0;
  }
  Pose pose;
  pose.R = svd.matrixV() * correction * svd.matrixU().transpose();
  pose.t = cam_mean - pose.R * world_mean;
  return pose;
}

// Newton iterations on the three law-of-cosines equations in the ray depths.
void PolishDepths(Vector3d& s, double a2, double b2, double c2, double cos_a,
                  double cos_b, double cos_g) {
  auto residual = [&](const Vector3d& d) {
    return Vector3d(d[1] * d[1] + d[2] * d[2] - 2.0 * d[1] * d[2] * cos_a - a2,
                    d[0] * d[0] + d[2] * d[2] - 2.0 * d[0] * d[2] * cos_b - b2,
                    d[0] * d[0] + d[1] * d[1] - 2.0 * d[0] * d[1] * cos_g - c2);
  };
  Vector3d r = residual(s);
  for (int iter = 0; iter < 5; ++iter) {
    Matrix3d j;
    j << 0.0, 2.0 * (s[1] - s[2] * cos_a), 2.0 * (s[2] - s[1] * cos_a),
        2.0 * (s[0] - s[2] * cos_b), 0.0, 2.0 * (s[2] - s[0] * cos_b),
        2.0 * (s[0] - s[1] * cos_g), 2.0 * (s[1] - s[0] * cos_g), 0.0;
    const Vector3d step = j.fullPivLu().solve(r);
    if (!step.allFinite()) return;
    const Vector3d candidate = s - step;
    const Vector3d r_new = residual(candidate);
    if (!(r_new.norm() < r.norm())) return;
    s = candidate;
    r = r_new;
  }
}

bool IsDegenerateTriangle(const Landmark& p1, const Landmark& p2,
                          const Landmark& p3) {
  constexpr double kMinDistance = 1e-9;
  constexpr double kMinArea = 1e-9;
  if ((p1 - p2).norm() <= kMinDistance || (p1 - p3).norm() <= kMinDistance ||
      (p2 - p3).norm() <= kMinDistance) {
    return true;
  }
  return 0.5 * (p2 - p1).cross(p3 - p1).norm() <= kMinArea;
}

std::vector<Pose> SolveP3PUnchecked(const Correspondence2D3D& m1,
                                    const Correspondence2D3D& m2,
                                    const Correspondence2D3D& m3,
                                    const Intrinsics& k) {
  const std::array<Vector3d, 3> bearings = {
      Bearing(k, m1.pixel), Bearing(k, m2.pixel), Bearing(k, m3.pixel)};
  const std::array<Vector3d, 3> world = {m1.landmark, m2.landmark, m3.landmark};

  const double a2 = (world[1] - world[2]).squaredNorm();
  const double b2 = (world[0] - world[2]).squaredNorm();
  const double c2 = (world[0] - world[1]).squaredNorm();
  const double cos_a = bearings[1].dot(bearings[2]);
  const double cos_b = bearings[0].dot(bearings[2]);
  const double cos_g = bearings[0].dot(bearings[1]);

  // With depths s1, s2 = u s1, s3 = v s1 the law of cosines gives
  //   b² = s1² L(v),  L(v) = 1 + v² - 2 v cos_b
  //   c² L = b² (1 + u² - 2 u cos_g)
  //   a² L = b² (u² + v² - 2 u v cos_a).
  // Subtracting the last two makes u = N(v) / D(v); substituting back yields
  // a quartic in v.
  const Poly l = {1.0, -2.0 * cos_b, 1.0};
  const Poly numerator = Add({b2, 0.0, -b2}, l, -(c2 - a2));
  const Poly denominator = {2.0 * b2 * cos_g, -2.0 * b2 * cos_a};
  const Poly d2 = Mul(denominator, denominator);
  Poly quartic = Add(d2, Mul(numerator, numerator));
  quartic = Add(quartic, Mul(numerator, denominator), -2.0 * cos_g);
  quartic = Scale(quartic, b2);
  quartic = Add(quartic, Mul(l, d2), -c2);

  std::vector<Pose> poses;
  for (const double v : SolvePolynomialRealRoots(quartic)) {
    if (!(v > 0.0)) continue;
    const double lv = Eval(l, v, nullptr);
    if (!(lv > 0.0)) continue;
    const double s1 = std::sqrt(b2 / lv);
    const double n_v = Eval(numerator, v, nullptr);
    const double d_v = Eval(denominator, v, nullptr);

    std::vector<double> u_candidates;
    if (std::abs(d_v) > 1e-10 * b2) u_candidates.push_back(n_v / d_v);
    if (std::abs(d_v) <= 1e-5 * b2) {
      // Near a common root of N and D the ratio is unreliable (double roots
      // in symmetric configurations); take u from the c² equation instead:
      // u² - 2 cos_g u + 1 - c² L / b² = 0.
      const double q = 1.0 - c2 * lv / b2;
      const double disc = std::max(cos_g * cos_g - q, 0.0);
      u_candidates.push_back(cos_g + std::sqrt(disc));
      u_candidates.push_back(cos_g - std::sqrt(disc));
    }

    for (const double u : u_candidates) {
      if (!(u > 0.0)) continue;
      Vector3d depths(s1, u * s1, v * s1);
      PolishDepths(depths, a2, b2, c2, cos_a, cos_b, cos_g);
      if (!(depths.minCoeff() > 0.0)) continue;
      const std::array<Vector3d, 3> cam = {depths[0] * bearings[0],
                                           depths[1] * bearings[1],
                                           depths[2] * bearings[2]};
      const Pose pose = AbsoluteOrientation(world, cam);
      if (!pose.IsValid(1e-6)) continue;
      if (ReprojectionError(pose, k, m1) > kSelfReprojectionTol ||
          ReprojectionError(pose, k, m2) > kSelfReprojectionTol ||
          ReprojectionError(pose, k, m3) > kSelfReprojectionTol) {
        continue;
      }
      const bool duplicate = std::any_of(poses.begin(), poses.end(), [&](const Pose& p) {
        return (p.R - pose.R).cwiseAbs().maxCoeff() < 1e-9 &&
               (p.t - pose.t).cwiseAbs().maxCoeff() < 1e-9;
      });
      if (!duplicate) poses.push_back(pose);
    }
  }
  return poses;
}

struct Hypothesis {
  bool valid = false;
  int inliers = -1;
  double error = kInf;
  Pose pose;
};

bool Better(int inliers, double error, int best_inliers, double best_error) {
  return inliers > best_inliers || (inliers == best_inliers && error < best_error);
}

Hypothesis EvaluateIteration(std::span<const Correspondence2D3D> corrs,
                             const Intrinsics& k, const RansacConfig& cfg,
                             std::uint64_t iteration) {
  Hypothesis best;
  const auto idx = SampleTriple(cfg.seed, iteration, static_cast<int>(corrs.size()));
  const auto& c1 = corrs[idx[0]];
  const auto& c2 = corrs[idx[1]];
  const auto& c3 = corrs[idx[2]];
  if (IsDegenerateTriangle(c1.landmark, c2.landmark, c3.landmark)) return best;
  for (const Pose& pose : SolveP3PUnchecked(c1, c2, c3, k)) {
    int count = 0;
    double error = 0.0;
    for (const auto& c : corrs) {
      const double e = ReprojectionError(pose, k, c);
      if (e <= cfg.inlier_threshold_px) {
        ++count;
        error += e;
      }
    }
    if (!best.valid || Better(count, error, best.inliers, best.error)) {
      best = {true, count, error, pose};
    }
  }
  return best;
}

double RequiredIterations(int inliers, int n, double confidence) {
  if (inliers <= 0) return kInf;
  const double w = static_cast<double>(inliers) / n;
  const double w3 = w * w * w;
  if (w3 >= 1.0) return 0.0;
  return std::log(1.0 - confidence) / std::log1p(-w3);
}

double Cost(const Pose& pose, const Intrinsics& k,
            std::span<const Correspondence2D3D> corrs) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    PixelPoint px;
    if (!TryProject(pose, k, c.landmark, &px)) return kInf;
    const double dx = px.x - c.pixel.x;
    const double dy = px.y - c.pixel.y;
    cost += dx * dx + dy * dy;
  }
  return cost;
}

}  // namespace

std::vector<double> SolvePolynomialRealRoots(std::span<const double> coeffs) {
  std::size_t degree = coeffs.size();
  double scale = 0.0;
  for (const double c : coeffs) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (degree > 0 && std::abs(coeffs[degree - 1]) <= 1e-14 * scale) --degree;
  if (degree <= 1) return {};
  const std::size_t n = degree - 1;  // polynomial degree
  const std::span<const double> poly = coeffs.first(degree);
  if (n == 1) return {-poly[0] / poly[1]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (std::size_t i = 0; i < n; ++i) companion(i, n - 1) = -poly[i] / poly[n];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return {};

  std::vector<double> roots;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const auto z = solver.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    double fx = Eval(poly, x, nullptr);
    for (int iter = 0; iter < 8; ++iter) {
      double dfx = 0.0;
      Eval(poly, x, &dfx);
      if (dfx == 0.0) break;
      const double next = x - fx / dfx;
      const double f_next = Eval(poly, next, nullptr);
      if (!(std::abs(f_next) <= std::abs(fx))) break;
      const double step = std::abs(next - x);
      x = next;
      fx = f_next;
      if (step <= 1e-12 * (1.0 + std::abs(x))) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<Pose> SolveP3P(const Correspondence2D3D& c1,
                           const Correspondence2D3D& c2,
                           const Correspondence2D3D& c3, const Intrinsics& k) {
  S2D_CHECK(!IsDegenerateTriangle(c1.landmark, c2.landmark, c3.landmark),
            ErrorCode::kDegenerateConfiguration,
            "P3P landmarks are collinear or coincident");
  return SolveP3PUnchecked(c1, c2, c3, k);
}

double ReprojectionError(const Pose& pose, const Intrinsics& k,
                         const Correspondence2D3D& c) {
  PixelPoint px;
  if (!TryProject(pose, k, c.landmark, &px)) return kInf;
  return std::hypot(px.x - c.pixel.x, px.y - c.pixel.y);
}

std::vector<int> FindInliers(const Pose& pose, const Intrinsics& k,
                             std::span<const Correspondence2D3D> corrs,
                             double threshold, double* total_error) {
  std::vector<int> inliers;
  double total = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double e = ReprojectionError(pose, k, corrs[i]);
    if (e <= threshold) {
      inliers.push_back(static_cast<int>(i));
      total += e;
    }
  }
  if (total_error != nullptr) *total_error = total;
  return inliers;
}

std::array<int, 3> SampleTriple(std::uint64_t seed, std::uint64_t iteration,
                                int n) {
  std::uint64_t state = seed;
  state = SplitMix64(state) ^ (iteration * 0xD1B54A32D192ED03ull);
  std::array<int, 3> idx{};
  idx[0] = Bounded(state, n);
  idx[1] = Bounded(state, n - 1);
  if (idx[1] >= idx[0]) ++idx[1];
  idx[2] = Bounded(state, n - 2);
  const int lo = std::min(idx[0], idx[1]);
  const int hi = std::max(idx[0], idx[1]);
  if (idx[2] >= lo) ++idx[2];
  if (idx[2] >= hi) ++idx[2];
  return idx;
}

std::optional<PoseEstimate> RansacPnp(std::span<const Correspondence2D3D> corrs,
                                      const Intrinsics& k,
                                      const RansacConfig& cfg) {
  S2D_CHECK(corrs.size() >= 4, ErrorCode::kTooFewCorrespondences,
            "RANSAC needs at least 4 correspondences, got " +
                std::to_string(corrs.size()));
  S2D_CHECK(cfg.IsValid(), ErrorCode::kInvalidArgument, "invalid RANSAC config");
  const int n = static_cast<int>(corrs.size());

  Hypothesis best;
  int iterations_run = 0;
  const std::size_t batch = 32 * static_cast<std::size_t>(std::max(NumThreads(), 1));
  std::vector<Hypothesis> results;
  bool done = false;
  for (std::size_t start = 0;
       !done && start < static_cast<std::size_t>(cfg.max_iterations);
       start += batch) {
    const std::size_t count =
        std::min(batch, static_cast<std::size_t>(cfg.max_iterations) - start);
    results.assign(count, Hypothesis{});
    ParallelFor(0, count, 4, [&](std::size_t i) {
      results[i] = EvaluateIteration(corrs, k, cfg, start + i);
    });
    // Sequential reduction in iteration order keeps the outcome independent
    // of the batch size and thread count.
    for (std::size_t i = 0; i < count; ++i) {
      const Hypothesis& h = results[i];
      if (h.valid && Better(h.inliers, h.error, best.inliers, best.error)) best = h;
      iterations_run = static_cast<int>(start + i + 1);
      if (best.valid &&
          iterations_run >= RequiredIterations(best.inliers, n, cfg.confidence)) {
        done = true;
        break;
      }
    }
  }
  if (!best.valid) return std::nullopt;

  PoseEstimate estimate;
  estimate.pose = best.pose;
  estimate.iterations_run = iterations_run;
  estimate.inlier_indices = FindInliers(estimate.pose, k, corrs,
                                        cfg.inlier_threshold_px,
                                        &estimate.inlier_error_px);

  if (cfg.refine) {
    for (int round = 0; round < 3 && estimate.inlier_indices.size() >= 4; ++round) {
      std::vector<Correspondence2D3D> subset;
      subset.reserve(estimate.inlier_indices.size());
      for (const int i : estimate.inlier_indices) subset.push_back(corrs[i]);
      const RefineResult refined = RefinePose(estimate.pose, subset, k);
      if (refined.singular) break;
      double error = 0.0;
      auto inliers = FindInliers(refined.pose, k, corrs, cfg.inlier_threshold_px,
                                 &error);
      if (inliers.size() < estimate.inlier_indices.size()) break;
      const bool unchanged = inliers == estimate.inlier_indices;
      estimate.pose = refined.pose;
      estimate.inlier_indices = std::move(inliers);
      estimate.inlier_error_px = error;
      if (unchanged) break;
    }
  }

  if (static_cast<int>(estimate.inlier_indices.size()) < cfg.min_inliers) {
    return std::nullopt;
  }
  return estimate;
}

Pose Retract(const Pose& pose, const PoseDelta& delta) {
  const Matrix3d rotation = ExpSO3(delta.head<3>());
  Pose out;
  out.R = rotation * pose.R;
  out.t = rotation * pose.t + delta.tail<3>();
  return out;
}

Eigen::Matrix<double, 2, 6> ReprojectionJacobian(const Pose& pose,
                                                 const Intrinsics& k,
                                                 const Landmark& landmark) {
  const Vector3d x = pose.Transform(landmark);
  S2D_CHECK(x.z() > kMinDepth, ErrorCode::kPointBehindCamera,
            "Jacobian requested for a point behind the camera");
  const double inv_z = 1.0 / x.z();
  Eigen::Matrix<double, 2, 3> d_pixel;
  d_pixel << k.fx * inv_z, 0.0, -k.fx * x.x() * inv_z * inv_z, 0.0,
      k.fy * inv_z, -k.fy * x.y() * inv_z * inv_z;
  Eigen::Matrix<double, 3, 6> d_point;
  d_point.leftCols<3>() = -Hat(x);
  d_point.rightCols<3>() = Matrix3d::Identity();
  return d_pixel * d_point;
}

RefineResult RefinePose(const Pose& init,
                        std::span<const Correspondence2D3D> inliers,
                        const Intrinsics& k, const RefineOptions& options) {
  S2D_CHECK(inliers.size() >= 4, ErrorCode::kTooFewCorrespondences,
            "pose refinement needs at least 4 correspondences");
  RefineResult result;
  result.pose = init;
  result.initial_cost = Cost(init, k, inliers);
  result.final_cost = result.initial_cost;
  if (!std::isfinite(result.initial_cost) || result.initial_cost == 0.0) {
    return result;
  }

  double lambda = 1e-3;
  Pose pose = init;
  double cost = result.initial_cost;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    PoseDelta g = PoseDelta::Zero();
    for (const auto& c : inliers) {
      const Vector3d x = pose.Transform(c.landmark);
      const Vector2d residual(k.fx * x.x() / x.z() + k.cx - c.pixel.x,
                              k.fy * x.y() / x.z() + k.cy - c.pixel.y);
      const auto j = ReprojectionJacobian(pose, k, c.landmark);
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * residual;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(
        h, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()[0] > 1e-12 * eig.eigenvalues()[5])) {
      if (iter == 0) {
        result.pose = init;
        result.final_cost = result.initial_cost;
        result.singular = true;
        return result;
      }
      break;
    }

    bool improved = false;
    while (lambda < 1e12) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() += lambda * h.diagonal();
      const PoseDelta step = damped.ldlt().solve(-g);
      const Pose candidate = Retract(pose, step);
      const double candidate_cost = Cost(candidate, k, inliers);
      if (candidate_cost < cost) {
        const double decrease = cost - candidate_cost;
        pose = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = decrease >= options.min_cost_decrease;
        break;
      }
      lambda *= 10.0;
    }
    result.iterations = iter + 1;
    if (!improved) break;
  }
  result.pose = pose;
  result.final_cost = cost;
  return result;
}

}  // namespace s2d
