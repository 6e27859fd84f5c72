#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace s2d {

using Vector2d = Eigen::Vector2d;
using Vector3d = Eigen::Vector3d;
using Matrix3d = Eigen::Matrix3d;

// A 3D point in the world frame, meters.
using Landmark = Eigen::Vector3d;

// Pinhole intrinsics with zero skew. Images are assumed undistorted.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  bool IsValid() const;
  Matrix3d Matrix() const;
};

// Continuous pixel coordinates; (0, 0) is the center of the top-left pixel.
struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  Vector2d AsVector() const { return {x, y}; }
};

// World-to-camera rigid transform: x_cam = R * x_world + t.
struct Pose {
  Matrix3d R = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();

  static Pose Identity() { return {}; }
  // Unit quaternion (w, x, y, z) for the world-to-camera rotation.
  static Pose FromQuaternion(double qw, double qx, double qy, double qz,
                             const Vector3d& t);
  // Canonical quaternion with qw >= 0.
  Eigen::Quaterniond Quaternion() const;

  Vector3d Transform(const Vector3d& x_world) const { return R * x_world + t; }
  Pose Inverse() const;
  // (*this) after `other`: x -> this(other(x)).
  Pose Compose(const Pose& other) const;

  // RᵀR = I and det(R) = +1 within `tol`, translation finite.
  bool IsValid(double tol = 1e-9) const;
};

inline constexpr double kMinDepth = 1e-9;

// Projects a world point. Throws PointBehindCamera when depth <= kMinDepth.
PixelPoint Project(const Pose& pose, const Intrinsics& k, const Landmark& p);

// Same as Project but returns false instead of throwing.
bool TryProject(const Pose& pose, const Intrinsics& k, const Landmark& p,
                PixelPoint* pixel);

// Unit-norm viewing ray in the camera frame.
Vector3d Bearing(const Intrinsics& k, const PixelPoint& px);

// -Rᵀt.
Vector3d CameraCenter(const Pose& pose);

struct PoseError {
  double position_m = 0.0;
  double rotation_deg = 0.0;
};

// Distance between camera centers and the angle of R_est * R_gtᵀ.
PoseError ComputePoseError(const Pose& est, const Pose& gt);

// Builds a world-to-camera pose for a camera at `center` looking at `target`
// with image y pointing away from `up`.
Pose LookAt(const Vector3d& center, const Vector3d& target,
            const Vector3d& up = Vector3d::UnitZ());

// Rodrigues' formula for the rotation exp([w]x).
Matrix3d ExpSO3(const Vector3d& w);

}  // namespace s2d
