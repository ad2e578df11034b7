#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace expo {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

// Rodrigues formula; the zero vector maps to the identity.
inline Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 k = hat(w);
  if (theta < 1e-7) return Mat3::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

// Rotation angle from the trace, in [0, pi].
inline double rotation_angle(const Mat3& r) {
  return std::acos(std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0));
}

// Axis-angle vector with norm in [0, pi].
inline Vec3 so3_log(const Mat3& r) {
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_theta_2 = 0.5 * vee.norm();  // sin(theta)
  const double theta = std::atan2(sin_theta_2, cos_theta);
  if (theta < 1e-7) return 0.5 * vee;
  if (M_PI - theta > 1e-4) return (theta / (2.0 * std::sin(theta))) * vee;

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part sym(R) = cos(t) I + (1 - cos(t)) a a^T, then fix its sign
  // with vee.
  const Mat3 s = (0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  Eigen::Index k = 0;
  s.diagonal().maxCoeff(&k);
  Vec3 axis = s.col(k) / std::sqrt(std::max(s(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(vee) < 0.0) axis = -axis;
  return theta * axis;
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

// Camera pose in the world frame (world_from_camera).
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// Transform taking points from the previous camera frame into the current
// one: X_cur = R X_prev + t.
inline RigidPose relative_pose(const RigidPose& prev, const RigidPose& cur) {
  RigidPose rel;
  rel.rotation = cur.rotation.transpose() * prev.rotation;
  rel.translation = cur.rotation.transpose() * (prev.translation - cur.translation);
  return rel;
}

}  // namespace expo
