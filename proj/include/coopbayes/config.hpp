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

// Scenario description and its JSON loader. The file format is documented in
// README.md; all quantities are SI. Every error message starts with the
// dotted path of the offending key.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopbayes/consensus.hpp"
#include "coopbayes/geometry.hpp"
#include "coopbayes/sim.hpp"

namespace coopbayes {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Standard deviations used to draw prior means around the true parameters,
/// per parameter block, and the isotropic prior covariance.
struct PriorSpec {
  double rel_offset_std = 0.5;
  double scaled_offset_std = 5.0;
  double mass_std = 10.0;
  double inertia_std = 1.0;
  double covariance = 0.5;
};

struct EstimatorSpec {
  double beta = 0.5;
  double rate = 100.0;  // Hz
  double rotational_warmup = 1.0;  // s
  double rotational_warmup_factor = 1e-6;  // beta_r = factor * beta before warmup ends
  int consensus_iterations = 1;
  double ratio_guard = 1e-3;
  double precision_guard = 1e-12;
};

struct ScenarioConfig {
  std::vector<AgentParams> agents;
  ObjectParams object;
  Grasp grasp;
  Pose object_initial;
  CommGraph graph;
  PriorSpec prior;
  EstimatorSpec estimator;
  double noise_variance = 2.0;  // target noise; 0 disables it
  ExcitationSchedule excitation = ExcitationSchedule::default_schedule();
  double offset_perturbation_std = 0.1;
  std::vector<Wrench> desired_wrenches;
  double dt = 1e-3;
  double duration = 7.0;
  std::uint64_t seed = 1;
  double delta = 0.1;
  nlohmann::json source;  // file contents as loaded, echoed into the manifest

  std::size_t num_agents() const { return agents.size(); }
  std::size_t steps_per_estimate() const {
    return static_cast<std::size_t>(std::llround(1.0 / (estimator.rate * dt)));
  }
  std::size_t total_steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown key");
  }
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline double get_number(const json& parent, const std::string& path, const char* key, double fallback) {
  if (!parent.contains(key) || parent.at(key).is_null()) return fallback;
  return number(parent.at(key), join(path, key));
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path + ": must be a positive finite number");
  return v;
}

inline Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected an array of 3 numbers");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

inline UnitQuaternion quaternion(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(path + ": expected [w, x, y, z]");
  Eigen::Vector4d c;
  for (int k = 0; k < 4; ++k) c[k] = number(j[static_cast<std::size_t>(k)], path);
  if (c.norm() < 1e-9) throw ConfigError(path + ": zero quaternion");
  return {c[0], c[1], c[2], c[3]};
}

/// A number (c * I), a 3-array (diagonal) or a 3x3 array.
inline Mat3 mat3(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>() * Mat3::Identity();
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected a number, 3 numbers, or a 3x3 array");
  if (j[0].is_number()) return vec3(j, path).asDiagonal();
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
  return m;
}

inline Mat3 spd3(const json& j, const std::string& path) {
  const Mat3 m = mat3(j, path);
  if ((m - m.transpose()).norm() > 1e-12) throw ConfigError(path + ": inertia must be symmetric");
  if (Eigen::LLT<Mat3>(m).info() != Eigen::Success) throw ConfigError(path + ": inertia must be positive definite");
  return m;
}

inline AgentParams agent_params(const json& j, const std::string& path, AgentParams a) {
  check_keys(j, path, {"mass", "inertia", "damping", "rot_damping", "stiffness", "rot_stiffness"});
  a.m = positive(get_number(j, path, "mass", a.m), join(path, "mass"));
  if (j.contains("inertia")) a.J = spd3(j.at("inertia"), join(path, "inertia"));
  a.d = positive(get_number(j, path, "damping", a.d), join(path, "damping"));
  a.delta = positive(get_number(j, path, "rot_damping", a.delta), join(path, "rot_damping"));
  a.k = positive(get_number(j, path, "stiffness", a.k), join(path, "stiffness"));
  a.kappa = positive(get_number(j, path, "rot_stiffness", a.kappa), join(path, "rot_stiffness"));
  return a;
}

inline int axis(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
  } else if (j.is_number_integer()) {
    const int a = j.get<int>();
    if (a >= 0 && a < 3) return a;
  }
  throw ConfigError(path + ": expected \"x\", \"y\", \"z\" or 0..2");
}

}  // namespace config_detail

/// Builds and validates a scenario from parsed JSON.
inline ScenarioConfig parse_config(const nlohmann::json& root) {
  using namespace config_detail;
  check_keys(root, "", {"seed", "duration", "dt", "delta", "object", "agent", "agents", "grasps", "graph", "prior",
                        "noise", "estimator", "excitation", "offset_perturbation_std", "desired_wrenches"});
  ScenarioConfig c;
  c.source = root;

  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = root.at("seed").get<std::uint64_t>();
  }
  c.duration = positive(get_number(root, "", "duration", c.duration), "duration");
  c.dt = positive(get_number(root, "", "dt", c.dt), "dt");
  c.delta = get_number(root, "", "delta", c.delta);
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta: must lie in (0, 1)");

  // object
  if (!root.contains("object")) throw ConfigError("object: missing");
  {
    const auto& o = root.at("object");
    check_keys(o, "object", {"mass", "inertia", "hollow_sphere_radius", "gravity", "position", "orientation"});
    c.object.m_o = positive(get_number(o, "object", "mass", 0.0), "object.mass");
    if (o.contains("inertia") == o.contains("hollow_sphere_radius")) {
      throw ConfigError("object.inertia: give exactly one of inertia or hollow_sphere_radius");
    }
    if (o.contains("inertia")) {
      c.object.J_body = spd3(o.at("inertia"), "object.inertia");
    } else {
      const double r = positive(number(o.at("hollow_sphere_radius"), "object.hollow_sphere_radius"),
                                "object.hollow_sphere_radius");
      c.object.J_body = (2.0 / 3.0) * c.object.m_o * r * r * Mat3::Identity();
    }
    if (o.contains("gravity")) c.object.g = vec3(o.at("gravity"), "object.gravity");
    if (o.contains("position")) c.object_initial.p = vec3(o.at("position"), "object.position");
    if (o.contains("orientation")) c.object_initial.q = quaternion(o.at("orientation"), "object.orientation");
  }

  // grasps
  if (!root.contains("grasps") || !root.at("grasps").is_array() || root.at("grasps").empty()) {
    throw ConfigError("grasps: expected a non-empty array");
  }
  const auto& grasps = root.at("grasps");
  const std::size_t n = grasps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string path = "grasps[" + std::to_string(i) + "]";
    check_keys(grasps[i], path, {"offset", "orientation"});
    if (!grasps[i].contains("offset")) throw ConfigError(path + ".offset: missing");
    c.grasp.geometry.offsets.push_back(vec3(grasps[i].at("offset"), path + ".offset"));
    c.grasp.orientations.push_back(grasps[i].contains("orientation")
                                       ? quaternion(grasps[i].at("orientation"), path + ".orientation")
                                       : UnitQuaternion::identity());
  }

  // agents
  AgentParams base;
  if (root.contains("agent")) base = agent_params(root.at("agent"), "agent", base);
  c.agents.assign(n, base);
  if (root.contains("agents")) {
    const auto& ags = root.at("agents");
    if (!ags.is_array() || ags.size() != n) throw ConfigError("agents: expected one entry per grasp");
    for (std::size_t i = 0; i < n; ++i) c.agents[i] = agent_params(ags[i], "agents[" + std::to_string(i) + "]", base);
  }

  // graph
  if (!root.contains("graph")) throw ConfigError("graph: missing");
  {
    const auto& g = root.at("graph");
    check_keys(g, "graph", {"adjacency", "alpha"});
    if (!g.contains("adjacency") || !g.at("adjacency").is_array() || g.at("adjacency").size() != n) {
      throw ConfigError("graph.adjacency: expected an N x N array with N = number of grasps");
    }
    c.graph.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    double min_positive = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      const auto& row = g.at("adjacency")[r];
      const std::string path = "graph.adjacency[" + std::to_string(r) + "]";
      if (!row.is_array() || row.size() != n) throw ConfigError(path + ": expected " + std::to_string(n) + " entries");
      for (std::size_t k = 0; k < n; ++k) {
        const double w = number(row[k], path);
        c.graph.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = w;
        if (w > 0.0) min_positive = std::min(min_positive, w);
      }
    }
    c.graph.alpha = g.contains("alpha") ? number(g.at("alpha"), "graph.alpha") : min_positive;
    const auto violations = validate_graph(c.graph.A, c.graph.alpha);
    if (!violations.empty()) {
      std::ostringstream s;
      s << "graph.adjacency: ";
      for (std::size_t k = 0; k < violations.size(); ++k) s << (k ? "; " : "") << violations[k];
      throw ConfigError(s.str());
    }
  }

  // prior
  if (root.contains("prior")) {
    const auto& p = root.at("prior");
    check_keys(p, "prior", {"std", "covariance"});
    if (p.contains("std")) {
      const auto& s = p.at("std");
      check_keys(s, "prior.std", {"relative_offset", "scaled_offset", "mass", "inertia"});
      const auto nonneg = [&](const char* key, double fallback) {
        const double v = get_number(s, "prior.std", key, fallback);
        if (!(v >= 0.0)) throw ConfigError(std::string("prior.std.") + key + ": must be non-negative");
        return v;
      };
      c.prior.rel_offset_std = nonneg("relative_offset", c.prior.rel_offset_std);
      c.prior.scaled_offset_std = nonneg("scaled_offset", c.prior.scaled_offset_std);
      c.prior.mass_std = nonneg("mass", c.prior.mass_std);
      c.prior.inertia_std = nonneg("inertia", c.prior.inertia_std);
    }
    c.prior.covariance = positive(get_number(p, "prior", "covariance", c.prior.covariance), "prior.covariance");
  }

  // noise and estimator
  bool beta_given = false;
  if (root.contains("noise")) {
    const auto& nz = root.at("noise");
    check_keys(nz, "noise", {"variance"});
    c.noise_variance = get_number(nz, "noise", "variance", c.noise_variance);
    if (!(c.noise_variance >= 0.0)) throw ConfigError("noise.variance: must be non-negative");
  }
  if (root.contains("estimator")) {
    const auto& e = root.at("estimator");
    check_keys(e, "estimator", {"beta", "rate", "rotational_warmup", "rotational_warmup_factor",
                                "consensus_iterations", "ratio_guard", "precision_guard"});
    if (e.contains("beta")) {
      c.estimator.beta = positive(number(e.at("beta"), "estimator.beta"), "estimator.beta");
      beta_given = true;
    }
    c.estimator.rate = positive(get_number(e, "estimator", "rate", c.estimator.rate), "estimator.rate");
    c.estimator.rotational_warmup = get_number(e, "estimator", "rotational_warmup", c.estimator.rotational_warmup);
    c.estimator.rotational_warmup_factor = positive(
        get_number(e, "estimator", "rotational_warmup_factor", c.estimator.rotational_warmup_factor),
        "estimator.rotational_warmup_factor");
    if (e.contains("consensus_iterations")) {
      if (!e.at("consensus_iterations").is_number_integer() || e.at("consensus_iterations").get<int>() < 1) {
        throw ConfigError("estimator.consensus_iterations: expected an integer >= 1");
      }
      c.estimator.consensus_iterations = e.at("consensus_iterations").get<int>();
    }
    c.estimator.ratio_guard = positive(get_number(e, "estimator", "ratio_guard", c.estimator.ratio_guard),
                                       "estimator.ratio_guard");
    c.estimator.precision_guard = positive(
        get_number(e, "estimator", "precision_guard", c.estimator.precision_guard), "estimator.precision_guard");
  }
  if (!beta_given) {
    if (!(c.noise_variance > 0.0)) throw ConfigError("estimator.beta: required when noise.variance is 0");
    c.estimator.beta = 1.0 / c.noise_variance;
  }
  const double steps = 1.0 / (c.estimator.rate * c.dt);
  if (std::abs(steps - std::round(steps)) > 1e-9 || std::round(steps) < 1.0) {
    throw ConfigError("estimator.rate: 1 / (rate * dt) must be a positive integer");
  }

  // excitation
  if (root.contains("excitation")) {
    const auto& ex = root.at("excitation");
    if (!ex.is_array()) throw ConfigError("excitation: expected an array of segments");
    c.excitation.segments.clear();
    for (std::size_t k = 0; k < ex.size(); ++k) {
      const std::string path = "excitation[" + std::to_string(k) + "]";
      check_keys(ex[k], path, {"axis", "amplitude", "frequency", "phase", "start", "end"});
      if (!ex[k].contains("axis")) throw ConfigError(path + ".axis: missing");
      SineSegment s;
      s.axis = axis(ex[k].at("axis"), path + ".axis");
      s.amplitude = get_number(ex[k], path, "amplitude", s.amplitude);
      s.frequency = get_number(ex[k], path, "frequency", s.frequency);
      s.phase = get_number(ex[k], path, "phase", s.phase);
      s.start = get_number(ex[k], path, "start", s.start);
      s.end = get_number(ex[k], path, "end", s.end);
      if (!(s.frequency >= 0.0)) throw ConfigError(path + ".frequency: must be non-negative");
      if (!(s.end > s.start)) throw ConfigError(path + ".end: must exceed start");
      c.excitation.segments.push_back(s);
    }
  }

  c.offset_perturbation_std = get_number(root, "", "offset_perturbation_std", c.offset_perturbation_std);
  if (!(c.offset_perturbation_std >= 0.0)) throw ConfigError("offset_perturbation_std: must be non-negative");

  c.desired_wrenches.assign(n, Wrench{});
  if (root.contains("desired_wrenches")) {
    const auto& w = root.at("desired_wrenches");
    if (!w.is_array() || w.size() != n) throw ConfigError("desired_wrenches: expected one [fx,fy,fz,tx,ty,tz] per grasp");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string path = "desired_wrenches[" + std::to_string(i) + "]";
      if (!w[i].is_array() || w[i].size() != 6) throw ConfigError(path + ": expected 6 numbers");
      for (int k = 0; k < 3; ++k) {
        c.desired_wrenches[i].f[k] = number(w[i][static_cast<std::size_t>(k)], path);
        c.desired_wrenches[i].tau[k] = number(w[i][static_cast<std::size_t>(k + 3)], path);
      }
    }
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": parse error: " + e.what());
  }
  return parse_config(root);
}

}  // namespace coopbayes
