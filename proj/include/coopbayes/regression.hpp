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

// Per-agent linear-in-the-parameters models built from local information.
//
// Translational model of agent i, y = Phi * theta_i, with
//   theta_i = [ ^o r_{j,i} for j != i (ascending j) ; m_o ^o r_i ; m_o ]
// (dimension 3N+1). Rotational model, y_r = Phi_r * theta_r, with
//   theta_r = vec6(^o J_o) = (J11, J12, J13, J22, J23, J33).
// Rows of Phi / Phi_r are the regressors of the individual outputs.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "coopbayes/geometry.hpp"
#include "coopbayes/sim.hpp"

namespace coopbayes {

using Mat36 = Eigen::Matrix<double, 3, 6>;

struct TranslationalSample {
  Vec3 y = Vec3::Zero();
  Eigen::Matrix<double, 3, Eigen::Dynamic> Phi;
};

struct RotationalSample {
  Vec3 y = Vec3::Zero();
  Mat36 Phi = Mat36::Zero();
};

/// Everything agent i may use: its own measured state, every agent's
/// reference signals and impedance parameters, and the constant grasp
/// rotations ^o q_j (so ^i R_o = (^o R_i)^T).
struct LocalInfo {
  FrameState z;
  std::span<const AgentDesired> desired;
  std::span<const AgentParams> agents;
  std::span<const UnitQuaternion> grasp_orientations;
  Vec3 g = Vec3(0.0, 0.0, -9.81);

  std::size_t num_agents() const { return agents.size(); }
};

/// Layout of theta_i for N agents; index helpers keep the ordering in one
/// place.
struct TranslationalLayout {
  std::size_t n;

  std::size_t dim() const { return 3 * n + 1; }
  /// Start of ^o r_{j,i} inside theta_i (j != i).
  std::size_t rel_offset(std::size_t j, std::size_t i) const {
    if (j == i) throw std::out_of_range("no relative offset of an agent to itself");
    return 3 * (j < i ? j : j - 1);
  }
  std::size_t scaled_offset() const { return 3 * (n - 1); }
  std::size_t mass() const { return 3 * n; }
};

inline VecX make_translational_theta(const GraspGeometry& g, double m_o, std::size_t i) {
  const TranslationalLayout lay{g.size()};
  VecX theta(lay.dim());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j == i) continue;
    theta.segment<3>(static_cast<Eigen::Index>(lay.rel_offset(j, i))) = g.rel_offset(j, i);
  }
  theta.segment<3>(static_cast<Eigen::Index>(lay.scaled_offset())) = m_o * g.offsets[i];
  theta[static_cast<Eigen::Index>(lay.mass())] = m_o;
  return theta;
}

/// R_o = R_i ^i R_o.
inline Mat3 object_rotation_from_agent(const LocalInfo& info, std::size_t i) {
  return rot_from_quat(info.z.pose.q) * rot_from_quat(info.grasp_orientations[i]).transpose();
}

inline TranslationalSample build_translational_sample(const LocalInfo& info, std::size_t i) {
  const std::size_t n = info.num_agents();
  if (info.desired.size() != n || info.grasp_orientations.size() != n || i >= n) {
    throw std::invalid_argument("build_translational_sample: agent count mismatch");
  }
  const TranslationalLayout lay{n};
  const Mat3 r_o = object_rotation_from_agent(info, i);
  const Vec3& w = info.z.twist.omega;
  const Mat3 t_op = T_operator(w, info.z.accel.alpha);
  const Mat3 s_w = skew(w);

  TranslationalSample out;
  out.Phi.setZero(3, static_cast<Eigen::Index>(lay.dim()));
  double m_c = 0.0, d_c = 0.0, k_c = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const AgentParams& a = info.agents[j];
    const FrameState& d = info.desired[j].state;
    out.y += a.m * d.accel.a + a.d * d.twist.v + a.k * d.pose.p - info.desired[j].wrench.f;
    m_c += a.m;
    d_c += a.d;
    k_c += a.k;
    if (j != i) {
      out.Phi.block<3, 3>(0, static_cast<Eigen::Index>(lay.rel_offset(j, i))) =
          (a.m * t_op + a.d * s_w + a.k * Mat3::Identity()) * r_o;
    }
  }
  out.y -= m_c * info.z.accel.a + d_c * info.z.twist.v + k_c * info.z.pose.p;
  out.Phi.block<3, 3>(0, static_cast<Eigen::Index>(lay.scaled_offset())) = -t_op * r_o;
  out.Phi.col(static_cast<Eigen::Index>(lay.mass())) = info.z.accel.a - info.g;
  return out;
}

/// Maps vec6(J) to J * w for symmetric J.
inline Mat36 stack_sym(const Vec3& w) {
  Mat36 m;
  m << w.x(), w.y(), w.z(), 0.0, 0.0, 0.0,
       0.0, w.x(), 0.0, w.y(), w.z(), 0.0,
       0.0, 0.0, w.x(), 0.0, w.y(), w.z();
  return m;
}

inline Vec6 vec6(const Mat3& j) {
  Vec6 v;
  v << j(0, 0), j(0, 1), j(0, 2), j(1, 1), j(1, 2), j(2, 2);
  return v;
}

inline Mat3 unvec6(const Vec6& v) {
  Mat3 j;
  j << v[0], v[1], v[2],
       v[1], v[3], v[4],
       v[2], v[4], v[5];
  return j;
}

/// V with vec6(R J R^T) = V vec6(J) for symmetric J.
inline Mat6 build_V(const Mat3& r) {
  if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6) {
    throw std::invalid_argument("build_V: rotation matrix is not orthogonal");
  }
  static constexpr int kRow[6] = {0, 0, 0, 1, 1, 2};
  static constexpr int kCol[6] = {0, 1, 2, 1, 2, 2};
  Mat6 v;
  for (int k = 0; k < 6; ++k) {
    Mat3 e = Mat3::Zero();
    e(kRow[k], kCol[k]) = 1.0;
    e(kCol[k], kRow[k]) = 1.0;
    v.col(k) = vec6(r * e * r.transpose());
  }
  return v;
}

/// Rotational sample of agent i. Other agents' states are reconstructed from
/// agent i's own state and the estimated offsets `offset_estimates`
/// (object frame, one per agent); true offsets reproduce the exact model.
inline RotationalSample build_rotational_sample(const LocalInfo& info,
                                                std::span<const Vec3> offset_estimates,
                                                std::size_t i) {
  const std::size_t n = info.num_agents();
  if (offset_estimates.size() != n) {
    throw std::invalid_argument("build_rotational_sample: missing translational estimate");
  }
  if (info.desired.size() != n || info.grasp_orientations.size() != n || i >= n) {
    throw std::invalid_argument("build_rotational_sample: agent count mismatch");
  }
  const Mat3 r_o = object_rotation_from_agent(info, i);
  const UnitQuaternion q_o = quat_mul(info.z.pose.q, quat_inv(info.grasp_orientations[i]));
  const Vec3& w = info.z.twist.omega;
  const Vec3& dw = info.z.accel.alpha;

  RotationalSample out;
  for (std::size_t j = 0; j < n; ++j) {
    const AgentParams& a = info.agents[j];
    const AgentDesired& des = info.desired[j];
    const Vec3 r_j = r_o * offset_estimates[j];
    FrameState zj = (j == i) ? info.z : rigid_transport(info.z, r_o * (offset_estimates[j] - offset_estimates[i]));
    zj.pose.q = quat_mul(q_o, info.grasp_orientations[j]);

    const Vec3 f_j = a.m * (zj.accel.a - des.state.accel.a) + a.d * (zj.twist.v - des.state.twist.v) +
                     a.k * (zj.pose.p - des.state.pose.p) + des.wrench.f;
    out.y -= r_j.cross(f_j) + a.J * (dw - des.state.accel.alpha) + a.delta * (w - des.state.twist.omega) +
             rotational_stiffness_torque(a.kappa, zj.pose.q, des.state.pose.q) + des.wrench.tau;
  }
  out.Phi = (stack_sym(dw) + skew(w) * stack_sym(w)) * build_V(r_o);
  return out;
}

}  // namespace coopbayes
