#include "s2d/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "s2d/error.h"

namespace s2d {

bool Intrinsics::IsValid() const {
  return fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy) &&
         std::isfinite(cx) && std::isfinite(cy);
}

Matrix3d Intrinsics::Matrix() const {
  Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Pose Pose::FromQuaternion(double qw, double qx, double qy, double qz,
                          const Vector3d& t) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  S2D_CHECK(q.norm() > 1e-12, ErrorCode::kInvalidArgument,
            "zero quaternion");
  q.normalize();
  Pose pose;
  pose.R = q.toRotationMatrix();
  pose.t = t;
  return pose;
}

Eigen::Quaterniond Pose::Quaternion() const {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

Pose Pose::Inverse() const {
  Pose inv;
  inv.R = R.transpose();
  inv.t = -(inv.R * t);
  return inv;
}

Pose Pose::Compose(const Pose& other) const {
  Pose out;
  out.R = R * other.R;
  out.t = R * other.t + t;
  return out;
}

bool Pose::IsValid(double tol) const {
  if (!R.allFinite() || !t.allFinite()) return false;
  if (((R.transpose() * R) - Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return std::abs(R.determinant() - 1.0) <= tol;
}

bool TryProject(const Pose& pose, const Intrinsics& k, const Landmark& p,
                PixelPoint* pixel) {
  const Vector3d x = pose.Transform(p);
  if (!(x.z() > kMinDepth)) return false;
  pixel->x = k.fx * x.x() / x.z() + k.cx;
  pixel->y = k.fy * x.y() / x.z() + k.cy;
  return true;
}

PixelPoint Project(const Pose& pose, const Intrinsics& k, const Landmark& p) {
  PixelPoint pixel;
  S2D_CHECK(TryProject(pose, k, p, &pixel), ErrorCode::kPointBehindCamera,
            "point has non-positive depth");
  return pixel;
}

Vector3d Bearing(const Intrinsics& k, const PixelPoint& px) {
  return Vector3d((px.x - k.cx) / k.fx, (px.y - k.cy) / k.fy, 1.0)
      .normalized();
}

Vector3d CameraCenter(const Pose& pose) { return -(pose.R.transpose() * pose.t); }

PoseError ComputePoseError(const Pose& est, const Pose& gt) {
  PoseError err;
  err.position_m = (CameraCenter(est) - CameraCenter(gt)).norm();
  const Matrix3d d = est.R * gt.R.transpose();
  const Vector3d axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  err.rotation_deg =
      std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0)) * 180.0 / std::numbers::pi;
  return err;
}

Pose LookAt(const Vector3d& center, const Vector3d& target, const Vector3d& up) {
  const Vector3d forward = (target - center).normalized();
  Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.unitOrthogonal();
  right.normalize();
  const Vector3d down = forward.cross(right);
  Pose pose;
  pose.R.row(0) = right.transpose();
  pose.R.row(1) = down.transpose();
  pose.R.row(2) = forward.transpose();
  pose.t = -(pose.R * center);
  return pose;
}

Matrix3d ExpSO3(const Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Matrix3d hat;
    hat << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return Matrix3d::Identity() + hat;
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

}  // namespace s2d
