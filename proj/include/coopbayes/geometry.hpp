// Copyright 2026 The coopbayes Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Quaternion algebra, skew operators, relative rigid-body kinematics and the
// grasp matrix. Everything here is a pure function over value types.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace coopbayes {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Hamilton unit quaternion, scalar first. Every constructor and product
/// leaves it normalized.
class UnitQuaternion {
 public:
  UnitQuaternion() : eta_(1.0), epsilon_(Vec3::Zero()) {}
  UnitQuaternion(double eta, const Vec3& epsilon) : eta_(eta), epsilon_(epsilon) {
    normalize();
  }
  UnitQuaternion(double w, double x, double y, double z)
      : UnitQuaternion(w, Vec3(x, y, z)) {}

  static UnitQuaternion identity() { return {}; }

  /// Rotation of `angle` radians about `axis` (need not be unit length).
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0) return {};
    return {std::cos(0.5 * angle), std::sin(0.5 * angle) / n * axis};
  }

  /// Exponential map of a rotation vector.
  static UnitQuaternion exp(const Vec3& rotvec) {
    const double angle = rotvec.norm();
    if (angle < 1e-12) return {1.0, 0.5 * rotvec};
    return from_axis_angle(rotvec, angle);
  }

  static UnitQuaternion from_rotation(const Mat3& r) {
    const Eigen::Quaterniond q(r);
    return {q.w(), q.x(), q.y(), q.z()};
  }

  double eta() const { return eta_; }
  const Vec3& epsilon() const { return epsilon_; }
  Eigen::Vector4d coeffs() const { return {eta_, epsilon_.x(), epsilon_.y(), epsilon_.z()}; }

 private:
  void normalize() {
    const double n = std::sqrt(eta_ * eta_ + epsilon_.squaredNorm());
    eta_ /= n;
    epsilon_ /= n;
  }

  double eta_;
  Vec3 epsilon_;
};

struct Pose {
  Vec3 p = Vec3::Zero();
  UnitQuaternion q;
};

struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

struct Accel {
  Vec3 a = Vec3::Zero();
  Vec3 alpha = Vec3::Zero();
};

struct Wrench {
  Vec3 f = Vec3::Zero();
  Vec3 tau = Vec3::Zero();
};

/// Pose, velocity and acceleration of one frame.
struct FrameState {
  Pose pose;
  Twist twist;
  Accel accel;
};

/// Constant object-frame offsets from the object's center of mass to each
/// grasp frame.
struct GraspGeometry {
  std::vector<Vec3> offsets;

  std::size_t size() const { return offsets.size(); }
  /// ^o r_{j,i} = ^o r_j - ^o r_i
  Vec3 rel_offset(std::size_t j, std::size_t i) const { return offsets[j] - offsets[i]; }
};

inline Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

inline UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.eta() * b.eta() - a.epsilon().dot(b.epsilon()),
          a.eta() * b.epsilon() + b.eta() * a.epsilon() + a.epsilon().cross(b.epsilon())};
}

inline UnitQuaternion quat_inv(const UnitQuaternion& q) { return {q.eta(), -q.epsilon()}; }

/// Orientation deviation q * inv(q_d).
inline UnitQuaternion quat_error(const UnitQuaternion& q, const UnitQuaternion& q_d) {
  return quat_mul(q, quat_inv(q_d));
}

inline Mat3 rot_from_quat(const UnitQuaternion& q) {
  const double w = q.eta();
  const Vec3& e = q.epsilon();
  return (w * w - e.squaredNorm()) * Mat3::Identity() + 2.0 * e * e.transpose() +
         2.0 * w * skew(e);
}

struct RelativePose {
  Vec3 p;
  UnitQuaternion q;
};

/// Pose of frame i expressed in frame j: (R_j^T (p_i - p_j), R_j^T R_i).
inline RelativePose relative_pose(const Pose& pose_i, const Pose& pose_j) {
  const Mat3 rj = rot_from_quat(pose_j.q);
  return {rj.transpose() * (pose_i.p - pose_j.p), quat_mul(quat_inv(pose_j.q), pose_i.q)};
}

/// T(w, w_dot) = S(w_dot) + S(w)^2; maps a rigid offset to its relative
/// acceleration.
inline Mat3 T_operator(const Vec3& omega, const Vec3& alpha) {
  const Mat3 sw = skew(omega);
  return skew(alpha) + sw * sw;
}

/// State of a frame rigidly attached at world-frame offset `r_rel` from the
/// frame described by `state`. Orientation is carried over unchanged; callers
/// compose a constant relative rotation themselves when needed.
inline FrameState rigid_transport(const FrameState& state, const Vec3& r_rel) {
  const Vec3& w = state.twist.omega;
  const Vec3& dw = state.accel.alpha;
  FrameState out = state;
  out.pose.p = state.pose.p + r_rel;
  out.twist.v = state.twist.v + w.cross(r_rel);
  out.accel.a = state.accel.a + T_operator(w, dw) * r_rel;
  return out;
}

/// Grasp matrix for world-frame offsets r_i = R_o ^o r_i, laid out as
///   [ I      0  ...  I      0 ]
///   [ S(r_1) I  ...  S(r_N) I ]
/// The object wrench is G * h_bar with h_bar = -[h_1; ...; h_N], i.e. G maps
/// the negated end-effector wrenches.
inline MatX grasp_matrix(std::span<const Vec3> world_offsets) {
  const auto n = static_cast<Eigen::Index>(world_offsets.size());
  MatX g = MatX::Zero(6, 6 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.block<3, 3>(0, 6 * i).setIdentity();
    g.block<3, 3>(3, 6 * i) = skew(world_offsets[i]);
    g.block<3, 3>(3, 6 * i + 3).setIdentity();
  }
  return g;
}

inline Vec6 stack(const Wrench& h) {
  Vec6 out;
  out << h.f, h.tau;
  return out;
}

inline Vec6 stack(const Twist& t) {
  Vec6 out;
  out << t.v, t.omega;
  return out;
}

/// Object wrench h_o = G * (-[h_1; ...; h_N]).
inline Wrench object_wrench(std::span<const Vec3> world_offsets, std::span<const Wrench> agent_wrenches) {
  VecX h_bar(6 * agent_wrenches.size());
  for (std::size_t i = 0; i < agent_wrenches.size(); ++i) {
    h_bar.segment<6>(static_cast<Eigen::Index>(6 * i)) = -stack(agent_wrenches[i]);
  }
  const Vec6 h_o = grasp_matrix(world_offsets) * h_bar;
  return {h_o.head<3>(), h_o.tail<3>()};
}

}  // namespace coopbayes
