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

// Closed-loop simulation of N impedance-controlled agents rigidly holding one
// object.
//
// The agents obey
//   f_i   = f_i^d + m_i dd(p_i) + d_i d(p_i) + k_i (p_i - p_i^d)        (deltas)
//   tau_i = t_i^d + J_i d(w_dot) + delta_i d(w) + 2 kappa_i d_eta d_eps
// and the object obeys M_o xdd_o + C_o = G * (-[h_1; ...; h_N]). The rigid
// grasp makes every agent acceleration affine in the object acceleration, so
// each step reduces to one 6x6 linear solve.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "coopbayes/geometry.hpp"

namespace coopbayes {

struct AgentParams {
  double m = 1.0;
  Mat3 J = 0.5 * Mat3::Identity();  // world frame
  double d = 150.0;
  double delta = 1.0;
  double k = 100.0;
  double kappa = 0.15;
};

struct ObjectParams {
  double m_o = 10.0;
  Mat3 J_body = Mat3::Identity();
  Vec3 g = Vec3(0.0, 0.0, -9.81);

  Mat3 world_inertia(const Mat3& r_o) const { return r_o * J_body * r_o.transpose(); }
};

/// Rigid grasp: constant object-frame offset and constant relative rotation
/// ^o q_i of every agent frame.
struct Grasp {
  GraspGeometry geometry;
  std::vector<UnitQuaternion> orientations;  // ^o q_i

  std::size_t size() const { return geometry.size(); }
};

// --- excitation ---------------------------------------------------------------

/// amplitude * sin(2 pi frequency t + phase) on one angular axis, active on
/// [start, end).
struct SineSegment {
  int axis = 0;
  double amplitude = 0.5;
  double frequency = 0.5;
  double phase = 0.0;
  double start = 0.0;
  double end = std::numeric_limits<double>::infinity();
};

struct ExcitationSchedule {
  std::vector<SineSegment> segments;

  /// Simultaneous sinusoids on all three axes at distinct frequencies. All
  /// axes must move early on: a rotation about a single axis leaves the
  /// offset component along that axis unobservable.
  static ExcitationSchedule default_schedule() {
    return {{{0, 0.5, 0.5, 0.0}, {1, 0.5, 0.7, 0.0}, {2, 0.5, 0.3, 0.0}}};
  }
};

struct ObjectExcitation {
  Twist twist;
  Vec3 alpha = Vec3::Zero();
};

/// Desired object twist (purely rotational) and its analytic derivative.
inline ObjectExcitation excitation_profile(double t, const ExcitationSchedule& schedule) {
  ObjectExcitation out;
  for (const auto& s : schedule.segments) {
    if (t < s.start || t >= s.end) continue;
    const double w = 2.0 * std::numbers::pi * s.frequency;
    out.twist.omega[s.axis] += s.amplitude * std::sin(w * t + s.phase);
    out.alpha[s.axis] += s.amplitude * w * std::cos(w * t + s.phase);
  }
  return out;
}

// --- desired signals ------------------------------------------------------------

struct AgentDesired {
  FrameState state;
  Wrench wrench;
};

/// Desired agent motion derived from a desired object motion through the
/// velocity transform xdot_i = G^T xdot_o, using (possibly perturbed)
/// object-frame offsets `offsets`:
///   p_i^d = p_i^d(0) + R_o^d(t) r_i - R_o^d(0) r_i,  q_i^d = q_o^d * ^o q_i.
/// `bias` carries p_i^d(0) - p_o^d - R_o^d(0) r_i so desired poses start at
/// the actual grasp poses.
inline std::vector<AgentDesired> desired_agent_trajectories(
    const FrameState& object_desired, std::span<const Vec3> offsets,
    std::span<const UnitQuaternion> grasp_orientations, std::span<const Vec3> bias,
    std::span<const Wrench> wrenches) {
  const Mat3 r_o = rot_from_quat(object_desired.pose.q);
  std::vector<AgentDesired> out(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    FrameState s = rigid_transport(object_desired, r_o * offsets[i]);
    s.pose.p += bias[i];
    s.pose.q = quat_mul(object_desired.pose.q, grasp_orientations[i]);
    out[i].state = s;
    out[i].wrench = wrenches[i];
  }
  return out;
}

/// Desired object pose integrated from the excitation schedule on a fixed time
/// grid (exponential map at the interval midpoint), cached so every consumer
/// sees the identical signal.
class DesiredTrajectory {
 public:
  DesiredTrajectory(Pose initial_object, ExcitationSchedule schedule, double dt,
                    std::vector<Vec3> offsets, std::vector<UnitQuaternion> grasp_orientations,
                    std::vector<Vec3> bias, std::vector<Wrench> wrenches)
      : schedule_(std::move(schedule)),
        dt_(dt),
        offsets_(std::move(offsets)),
        grasp_orientations_(std::move(grasp_orientations)),
        bias_(std::move(bias)),
        wrenches_(std::move(wrenches)),
        origin_(initial_object.p) {
    orientations_.push_back(initial_object.q);
  }

  FrameState object_at(std::size_t step) {
    while (orientations_.size() <= step) {
      const double t_mid = (static_cast<double>(orientations_.size()) - 0.5) * dt_;
      const Vec3 w = excitation_profile(t_mid, schedule_).twist.omega;
      orientations_.push_back(quat_mul(UnitQuaternion::exp(w * dt_), orientations_.back()));
    }
    const auto ex = excitation_profile(static_cast<double>(step) * dt_, schedule_);
    FrameState s;
    s.pose = {origin_, orientations_[step]};
    s.twist = ex.twist;
    s.accel.alpha = ex.alpha;
    return s;
  }

  std::vector<AgentDesired> agents_at(std::size_t step) {
    return desired_agent_trajectories(object_at(step), offsets_, grasp_orientations_, bias_,
                                      wrenches_);
  }

  double dt() const { return dt_; }
  const std::vector<Vec3>& offsets() const { return offsets_; }

 private:
  ExcitationSchedule schedule_;
  double dt_;
  std::vector<Vec3> offsets_;
  std::vector<UnitQuaternion> grasp_orientations_;
  std::vector<Vec3> bias_;
  std::vector<Wrench> wrenches_;
  Vec3 origin_;
  std::vector<UnitQuaternion> orientations_;
};

// --- dynamics -------------------------------------------------------------------

/// Object pose and twist; agent states follow from the rigid grasp.
struct WorldState {
  Pose pose;
  Twist twist;
};

/// Agent state for a given object state/acceleration.
inline FrameState agent_state(const WorldState& w, const Accel& object_accel, const Grasp& grasp,
                              std::size_t i) {
  const FrameState obj{w.pose, w.twist, object_accel};
  FrameState s = rigid_transport(obj, rot_from_quat(w.pose.q) * grasp.geometry.offsets[i]);
  s.pose.q = quat_mul(w.pose.q, grasp.orientations[i]);
  return s;
}

/// 2 kappa d_eta d_eps, the rotational part of the geometrically consistent
/// stiffness.
inline Vec3 rotational_stiffness_torque(double kappa, const UnitQuaternion& q,
                                        const UnitQuaternion& q_d) {
  const UnitQuaternion dq = quat_error(q, q_d);
  return 2.0 * dq.eta() * kappa * dq.epsilon();
}

/// End-effector wrench from the impedance law, given the agent's full state.
inline Wrench impedance_wrench(const AgentParams& a, const FrameState& s, const AgentDesired& des) {
  const FrameState& d = des.state;
  Wrench h;
  h.f = des.wrench.f + a.m * (s.accel.a - d.accel.a) + a.d * (s.twist.v - d.twist.v) +
        a.k * (s.pose.p - d.pose.p);
  h.tau = des.wrench.tau + a.J * (s.accel.alpha - d.accel.alpha) +
          a.delta * (s.twist.omega - d.twist.omega) +
          rotational_stiffness_torque(a.kappa, s.pose.q, d.pose.q);
  return h;
}

struct CoupledSolution {
  Accel object_accel;
  std::vector<Wrench> wrenches;
};

/// Object acceleration and agent wrenches that satisfy every impedance law
/// and the object dynamics simultaneously.
inline CoupledSolution solve_coupled_acceleration(const WorldState& w,
                                                  std::span<const AgentParams> agents,
                                                  const ObjectParams& object, const Grasp& grasp,
                                                  std::span<const AgentDesired> desired) {
  const Mat3 r_o = rot_from_quat(w.pose.q);
  const Vec3& omega = w.twist.omega;
  const Mat3 j_o = object.world_inertia(r_o);

  // Unknowns x = [p_dd_o; w_dot]. Agent accel: p_dd_i = p_dd_o - S(r_i) w_dot + c_i.
  Mat6 a = Mat6::Zero();
  Vec6 b = Vec6::Zero();
  a.topLeftCorner<3, 3>() = object.m_o * Mat3::Identity();
  a.bottomRightCorner<3, 3>() = j_o;
  b.head<3>() = object.m_o * object.g;
  b.tail<3>() = -omega.cross(j_o * omega);

  const FrameState zero_accel_obj{w.pose, w.twist, Accel{}};
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentParams& ag = agents[i];
    const Vec3 r = r_o * grasp.geometry.offsets[i];
    const Mat3 sr = skew(r);
    // Wrench with zero object acceleration; the acceleration-dependent part is
    // m_i (p_dd_o - S(r) w_dot) for the force and J_i w_dot for the torque.
    FrameState s = rigid_transport(zero_accel_obj, r);
    s.pose.q = quat_mul(w.pose.q, grasp.orientations[i]);
    const Wrench h0 = impedance_wrench(ag, s, desired[i]);

    // m_o p_dd_o - m_o g = -sum f_i
    a.topLeftCorner<3, 3>() += ag.m * Mat3::Identity();
    a.topRightCorner<3, 3>() -= ag.m * sr;
    b.head<3>() -= h0.f;
    // J_o w_dot + w x J_o w = -sum (S(r) f_i + tau_i)
    a.bottomLeftCorner<3, 3>() += ag.m * sr;
    a.bottomRightCorner<3, 3>() += -ag.m * sr * sr + ag.J;
    b.tail<3>() -= sr * h0.f + h0.tau;
  }

  const Eigen::PartialPivLU<Mat6> lu(a);
  if (!(std::abs(lu.determinant()) > 0.0)) {
    throw std::logic_error("coupled system matrix is singular");
  }
  const Vec6 x = lu.solve(b);

  CoupledSolution out;
  out.object_accel.a = x.head<3>();
  out.object_accel.alpha = x.tail<3>();
  out.wrenches.resize(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    out.wrenches[i] = impedance_wrench(agents[i], agent_state(w, out.object_accel, grasp, i), desired[i]);
  }
  return out;
}

/// Semi-implicit Euler: twist first, then pose with the updated twist; the
/// orientation advances by the exponential map of w dt (world frame).
inline WorldState step(const WorldState& w, const Accel& accel, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  WorldState out;
  out.twist.v = w.twist.v + dt * accel.a;
  out.twist.omega = w.twist.omega + dt * accel.alpha;
  out.pose.p = w.pose.p + dt * out.twist.v;
  out.pose.q = quat_mul(UnitQuaternion::exp(dt * out.twist.omega), w.pose.q);
  return out;
}

/// y + eps, eps ~ N(0, 1/beta I).
template <class Rng>
Vec3 sample_target_noise(const Vec3& y, double beta, Rng& rng) {
  if (!(beta > 0.0)) throw std::invalid_argument("sample_target_noise: beta must be positive");
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(beta));
  Vec3 out = y;
  for (int k = 0; k < 3; ++k) out[k] += n(rng);
  return out;
}

/// Owns the world state and advances it on a fixed grid; after `solve()` the
/// cached accelerations and wrenches belong to the current step.
class CoupledSim {
 public:
  CoupledSim(std::vector<AgentParams> agents, ObjectParams object, Grasp grasp, WorldState initial,
             DesiredTrajectory desired)
      : agents_(std::move(agents)),
        object_(std::move(object)),
        grasp_(std::move(grasp)),
        state_(initial),
        desired_(std::move(desired)) {
    solve();
  }

  std::size_t step_index() const { return step_; }
  double time() const { return static_cast<double>(step_) * desired_.dt(); }
  const WorldState& state() const { return state_; }
  const CoupledSolution& solution() const { return solution_; }
  const std::vector<AgentDesired>& desired() const { return current_desired_; }
  const std::vector<AgentParams>& agents() const { return agents_; }
  const ObjectParams& object() const { return object_; }
  const Grasp& grasp() const { return grasp_; }
  DesiredTrajectory& trajectory() { return desired_; }

  FrameState agent(std::size_t i) const {
    return agent_state(state_, solution_.object_accel, grasp_, i);
  }
  FrameState object_frame() const { return {state_.pose, state_.twist, solution_.object_accel}; }

  void advance() {
    state_ = step(state_, solution_.object_accel, desired_.dt());
    ++step_;
    solve();
  }

 private:
  void solve() {
    current_desired_ = desired_.agents_at(step_);
    solution_ = solve_coupled_acceleration(state_, agents_, object_, grasp_, current_desired_);
  }

  std::vector<AgentParams> agents_;
  ObjectParams object_;
  Grasp grasp_;
  WorldState state_;
  DesiredTrajectory desired_;
  std::size_t step_ = 0;
  std::vector<AgentDesired> current_desired_;
  CoupledSolution solution_;
};

}  // namespace coopbayes
