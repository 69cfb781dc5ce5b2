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

// End-to-end run: simulate -> local regression -> gPoE -> decomposition ->
// consensus -> rotational regression -> consensus -> bounds.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "coopbayes/bayes.hpp"
#include "coopbayes/bounds.hpp"
#include "coopbayes/config.hpp"
#include "coopbayes/consensus.hpp"
#include "coopbayes/geometry.hpp"
#include "coopbayes/regression.hpp"
#include "coopbayes/sim.hpp"

namespace coopbayes {

inline constexpr int kOutputsPerModel = 3;

struct Errors {
  double e_m = 0.0;
  double e_r = 0.0;
  double e_J = 0.0;
};

struct AgentRecord {
  VecX mean;  // [r_1 ... r_N, m_o], consensus
  VecX var;
  Vec6 j_mean = Vec6::Zero();  // vec6(^o J_o), consensus
  Vec6 j_var = Vec6::Zero();
  Errors errors;
};

struct StepRecord {
  double time = 0.0;
  std::vector<AgentRecord> agents;
  VecX bound;  // eta_hat, [r_1 ... r_N, m_o]; +inf while the mass interval contains zero
  bool bound_valid = false;
};

struct RunCounters {
  std::size_t ratio_holds = 0;          // decomposition reused (denominator guard)
  std::size_t precision_holds = 0;      // consensus output reused (zeta guard)
  std::size_t assumption4_failures = 0; // steps without a valid bound
};

struct RunResult {
  std::size_t num_agents = 0;
  VecX truth;  // [r_1 ... r_N, m_o]
  Vec6 truth_J = Vec6::Zero();
  std::vector<StepRecord> steps;
  RunCounters counters;
  double max_rigidity_drift = 0.0;
};

inline VecX stacked_truth(const ScenarioConfig& c) {
  const std::size_t n = c.num_agents();
  VecX v(static_cast<Eigen::Index>(3 * n + 1));
  for (std::size_t j = 0; j < n; ++j) v.segment<3>(static_cast<Eigen::Index>(3 * j)) = c.grasp.geometry.offsets[j];
  v[v.size() - 1] = c.object.m_o;
  return v;
}

/// e_m = |m_o error|, e_r = norm of agent i's own-offset error, e_J = norm of
/// the vec6 inertia error; all from agent i's consensus estimate.
inline Errors compute_errors(const AgentRecord& row, const VecX& truth, const Vec6& truth_J, std::size_t i) {
  if (row.mean.size() != truth.size()) throw std::invalid_argument("compute_errors: dimension mismatch");
  const auto r = static_cast<Eigen::Index>(3 * i);
  return {std::abs(row.mean[row.mean.size() - 1] - truth[truth.size() - 1]),
          (row.mean.segment<3>(r) - truth.segment<3>(r)).norm(), (row.j_mean - truth_J).norm()};
}

/// Independent random streams derived from the master seed.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

struct RunOptions {
  bool record_all_steps = true;  // false keeps only the final step
};

namespace scenario_detail {

enum Stream : std::uint64_t { kPrior = 1, kPerturbation = 2, kNoise = 3, kRotNoise = 4 };

struct AgentEstimator {
  std::array<BlrExpert, kOutputsPerModel> trans;
  std::array<BlrExpert, kOutputsPerModel> rot;
  std::optional<MarginalGaussian> decomposed;
  GaussianBelief fused;
  std::mt19937_64 noise;
  std::mt19937_64 rot_noise;
};

}  // namespace scenario_detail

inline RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
  using namespace scenario_detail;
  const std::size_t n = cfg.num_agents();
  const TranslationalLayout lay{n};
  const auto dim = static_cast<Eigen::Index>(lay.dim());

  // Offsets used to plan the desired motion are perturbed once per run.
  auto perturb_rng = make_stream(cfg.seed, kPerturbation);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> planned(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) planned[i][k] = cfg.grasp.geometry.offsets[i][k] + cfg.offset_perturbation_std * unit(perturb_rng);
  }
  // Desired poses start at the actual grasp poses.
  const Mat3 r0 = rot_from_quat(cfg.object_initial.q);
  std::vector<Vec3> bias(n);
  for (std::size_t i = 0; i < n; ++i) bias[i] = r0 * (cfg.grasp.geometry.offsets[i] - planned[i]);

  DesiredTrajectory desired(cfg.object_initial, cfg.excitation, cfg.dt, planned, cfg.grasp.orientations, bias,
                            cfg.desired_wrenches);
  CoupledSim sim(cfg.agents, cfg.object, cfg.grasp, WorldState{cfg.object_initial, Twist{}}, std::move(desired));

  // Priors: each expert's mean drawn around the truth, isotropic covariance.
  auto prior_rng = make_stream(cfg.seed, kPrior);
  const Vec6 truth_j = vec6(cfg.object.J_body);
  std::vector<AgentEstimator> est(n);
  for (std::size_t i = 0; i < n; ++i) {
    const VecX theta = make_translational_theta(cfg.grasp.geometry, cfg.object.m_o, i);
    VecX stds(dim);
    stds.head(static_cast<Eigen::Index>(lay.scaled_offset())).setConstant(cfg.prior.rel_offset_std);
    stds.segment<3>(static_cast<Eigen::Index>(lay.scaled_offset())).setConstant(cfg.prior.scaled_offset_std);
    stds[static_cast<Eigen::Index>(lay.mass())] = cfg.prior.mass_std;
    for (int m = 0; m < kOutputsPerModel; ++m) {
      VecX mu(dim);
      for (Eigen::Index k = 0; k < dim; ++k) mu[k] = theta[k] + stds[k] * unit(prior_rng);
      est[i].trans[static_cast<std::size_t>(m)] = BlrExpert({mu, cfg.prior.covariance * MatX::Identity(dim, dim)});
    }
    for (int m = 0; m < kOutputsPerModel; ++m) {
      VecX mu(6);
      for (int k = 0; k < 6; ++k) mu[k] = truth_j[k] + cfg.prior.inertia_std * unit(prior_rng);
      est[i].rot[static_cast<std::size_t>(m)] = BlrExpert({mu, cfg.prior.covariance * MatX::Identity(6, 6)});
    }
    est[i].noise = make_stream(cfg.seed, kNoise, i);
    est[i].rot_noise = make_stream(cfg.seed, kRotNoise, i);
  }

  ConsensusNetwork trans_net(cfg.graph, cfg.estimator.precision_guard);
  ConsensusNetwork rot_net(cfg.graph, cfg.estimator.precision_guard);

  RunResult result;
  result.num_agents = n;
  result.truth = stacked_truth(cfg);
  result.truth_J = truth_j;

  const bool noisy = cfg.noise_variance > 0.0;
  const double noise_beta = noisy ? 1.0 / cfg.noise_variance : 0.0;
  const std::size_t every = cfg.steps_per_estimate();
  const std::size_t total = cfg.total_steps();
  std::vector<VecX> psis(n), psis_r(n);
  std::vector<FrameState> z(n);

  for (std::size_t k = 0;; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const FrameState a = sim.agent(i);
      const RelativePose rel = relative_pose(a.pose, sim.state().pose);
      result.max_rigidity_drift = std::max(result.max_rigidity_drift, (rel.p - cfg.grasp.geometry.offsets[i]).norm());
    }

    if (k % every == 0) {
      const double t = sim.time();
      for (std::size_t i = 0; i < n; ++i) z[i] = sim.agent(i);

      // Translational problem: local regression, gPoE, decomposition.
      for (std::size_t i = 0; i < n; ++i) {
        const LocalInfo info{z[i], sim.desired(), cfg.agents, cfg.grasp.orientations, cfg.object.g};
        const TranslationalSample s = build_translational_sample(info, i);
        const Vec3 y = noisy ? sample_target_noise(s.y, noise_beta, est[i].noise) : s.y;
        for (int m = 0; m < kOutputsPerModel; ++m) {
          est[i].trans[static_cast<std::size_t>(m)].update(s.Phi.row(m).transpose(), y[m], cfg.estimator.beta);
        }
        est[i].fused = gpoe(std::span<const BlrExpert>(est[i].trans));
        try {
          est[i].decomposed = assemble_local(est[i].fused, i, n, cfg.estimator.ratio_guard);
        } catch (const DenominatorNearZero&) {
          ++result.counters.ratio_holds;
          if (!est[i].decomposed) {
            // Nothing to hold yet: contribute a vanishing-precision input.
            est[i].decomposed = MarginalGaussian{VecX::Zero(dim), VecX::Constant(dim, 1e12)};
          }
        }
        psis[i] = psi_transform(*est[i].decomposed);
      }
      trans_net.update(psis, cfg.estimator.consensus_iterations);

      // Rotational problem, driven by the consensus offsets.
      const double beta_r = t < cfg.estimator.rotational_warmup
                                ? cfg.estimator.rotational_warmup_factor * cfg.estimator.beta
                                : cfg.estimator.beta;
      for (std::size_t i = 0; i < n; ++i) {
        const MarginalGaussian& src = trans_net.output(i) ? *trans_net.output(i) : *est[i].decomposed;
        std::vector<Vec3> offsets(n);
        for (std::size_t j = 0; j < n; ++j) offsets[j] = src.mean.segment<3>(static_cast<Eigen::Index>(3 * j));
        const LocalInfo info{z[i], sim.desired(), cfg.agents, cfg.grasp.orientations, cfg.object.g};
        const RotationalSample s = build_rotational_sample(info, offsets, i);
        const Vec3 y = noisy ? sample_target_noise(s.y, noise_beta, est[i].rot_noise) : s.y;
        for (int m = 0; m < kOutputsPerModel; ++m) {
          est[i].rot[static_cast<std::size_t>(m)].update(s.Phi.row(m).transpose(), y[m], beta_r);
        }
        const GaussianBelief fused_r = gpoe(std::span<const BlrExpert>(est[i].rot));
        psis_r[i] = psi_transform({fused_r.mu, fused_r.Sigma.diagonal()});
      }
      rot_net.update(psis_r, cfg.estimator.consensus_iterations);

      const bool last = k + every > total;
      if (opts.record_all_steps || last) {
        StepRecord rec;
        rec.time = t;

        // Bounds.
        std::vector<AgentBoundTerms> terms(n);
        bool valid = true;
        for (std::size_t i = 0; i < n; ++i) {
          std::array<MatX, kOutputsPerModel> precisions;
          std::array<VecX, kOutputsPerModel> stddevs;
          for (std::size_t m = 0; m < kOutputsPerModel; ++m) {
            precisions[m] = est[i].trans[m].precision();
            stddevs[m] = expert_stddev(est[i].trans[m].covariance());
          }
          terms[i].eta = local_eta(est[i].fused.Sigma, precisions, stddevs, cfg.delta, n);
          terms[i].decomposed_var = est[i].decomposed->var;
          const auto so = static_cast<Eigen::Index>(lay.scaled_offset());
          const auto ms = static_cast<Eigen::Index>(lay.mass());
          try {
            terms[i].rho = rho_bound(est[i].fused.mu.segment<3>(so), est[i].fused.mu[ms], terms[i].eta.segment<3>(so),
                                     terms[i].eta[ms]);
          } catch (const Assumption4Violated&) {
            valid = false;
          }
        }
        rec.bound_valid = valid;
        if (valid) {
          rec.bound = aggregate_eta(terms).stacked();
        } else {
          rec.bound = VecX::Constant(dim, std::numeric_limits<double>::infinity());
          ++result.counters.assumption4_failures;
        }

        rec.agents.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          AgentRecord& ar = rec.agents[i];
          const MarginalGaussian& m = trans_net.output(i) ? *trans_net.output(i) : *est[i].decomposed;
          ar.mean = m.mean;
          ar.var = m.var;
          if (rot_net.output(i)) {
            ar.j_mean = rot_net.output(i)->mean;
            ar.j_var = rot_net.output(i)->var;
          }
          ar.errors = compute_errors(ar, result.truth, result.truth_J, i);
        }
        result.steps.push_back(std::move(rec));
      }
      if (last) break;
    }
    sim.advance();
  }
  result.counters.precision_holds = trans_net.held_count() + rot_net.held_count();
  return result;
}

/// True when every agent's consensus estimate lies within the bound,
/// elementwise.
inline bool bound_covers(const StepRecord& rec, const VecX& truth) {
  if (!rec.bound_valid) return false;
  for (const auto& a : rec.agents) {
    if (((a.mean - truth).cwiseAbs().array() > rec.bound.array()).any()) return false;
  }
  return true;
}

struct CoverageReport {
  std::size_t trials = 0;
  std::size_t covered = 0;
  std::size_t invalid_bounds = 0;
  double fraction() const { return trials ? static_cast<double>(covered) / static_cast<double>(trials) : 0.0; }
};

/// Final-step coverage of the bound over seeds cfg.seed, cfg.seed+1, ...
/// Trials are independent and spread over `threads` workers; the report does
/// not depend on scheduling.
inline CoverageReport run_coverage(ScenarioConfig cfg, std::size_t trials, double delta, unsigned threads = 0) {
  cfg.delta = delta;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<char> covered(trials, 0), invalid(trials, 0);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < trials;) {
      ScenarioConfig c = cfg;
      c.seed = cfg.seed + k;
      const RunResult r = run_scenario(c, {.record_all_steps = false});
      const StepRecord& last = r.steps.back();
      covered[k] = bound_covers(last, r.truth) ? 1 : 0;
      invalid[k] = last.bound_valid ? 0 : 1;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  CoverageReport rep;
  rep.trials = trials;
  for (std::size_t k = 0; k < trials; ++k) {
    rep.covered += static_cast<std::size_t>(covered[k]);
    rep.invalid_bounds += static_cast<std::size_t>(invalid[k]);
  }
  return rep;
}

}  // namespace coopbayes
