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

// High-probability error bounds for the consensus estimates of
// [^o r_1 ... ^o r_N, m_o].
//
// Per agent, a union bound over all 3(3N+1)N Gaussian tails of the BLR
// experts gives eta_i; interval arithmetic carries eta_i through the
// (m_o ^o r_i)/m_o ratio; precision weights carry it through the network
// average.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "coopbayes/geometry.hpp"
#include "coopbayes/regression.hpp"

namespace coopbayes {

class Assumption4Violated : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// sqrt(2 log(6 N (3N+1) / delta))
inline double bound_gamma(std::size_t n, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bound_gamma: delta must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  return std::sqrt(2.0 * std::log(6.0 * nn * (3.0 * nn + 1.0) / delta));
}

/// Marginal standard deviations of an expert covariance; the Gaussian tail
/// bound is a multiple of these.
inline VecX expert_stddev(const MatX& sigma) { return sigma.diagonal().cwiseMax(0.0).cwiseSqrt(); }

/// eta_i = gamma * sum_m |Sigma_i Sigma_m^-1 / M| s_m, with |.| elementwise
/// and s_m the marginal standard deviations of expert m.
inline VecX local_eta(const MatX& sigma_fused, std::span<const MatX> expert_precisions,
                      std::span<const VecX> expert_stddevs, double delta, std::size_t n) {
  if (expert_precisions.size() != expert_stddevs.size() || expert_precisions.empty()) {
    throw std::invalid_argument("local_eta: expert count mismatch");
  }
  const double m = static_cast<double>(expert_precisions.size());
  VecX eta = VecX::Zero(sigma_fused.rows());
  for (std::size_t k = 0; k < expert_precisions.size(); ++k) {
    const MatX w = sigma_fused * expert_precisions[k] / m;
    eta += w.cwiseAbs() * expert_stddevs[k];
  }
  return bound_gamma(n, delta) * eta;
}

inline bool check_assumption4(double mean_m_o, double eta_m_o) { return std::abs(mean_m_o) - eta_m_o > 0.0; }

/// Largest deviation of (a +- e_a)/(b +- e_b) from a/b over the four corners,
/// elementwise.
inline Vec3 rho_bound(const Vec3& mean_mr, double mean_m, const Vec3& eta_mr, double eta_m) {
  if (!check_assumption4(mean_m, eta_m)) {
    throw Assumption4Violated("rho_bound: mass interval contains zero");
  }
  const Vec3 center = mean_mr / mean_m;
  Vec3 out = Vec3::Zero();
  for (double sa : {-1.0, 1.0}) {
    for (double sb : {-1.0, 1.0}) {
      const Vec3 corner = (mean_mr + sa * eta_mr) / (mean_m + sb * eta_m);
      out = out.cwiseMax((center - corner).cwiseAbs());
    }
  }
  return out;
}

/// Bound ingredients contributed by one agent.
struct AgentBoundTerms {
  VecX eta;             // theta_i layout, 3N+1
  Vec3 rho;             // bound on the own-offset ratio
  VecX decomposed_var;  // [r_1 ... r_N, m_o] layout, 3N+1
};

struct EtaHat {
  std::vector<Vec3> eta_r;
  double eta_m = 0.0;

  /// [eta_r_1 ... eta_r_N, eta_m]
  VecX stacked() const {
    VecX v(static_cast<Eigen::Index>(3 * eta_r.size() + 1));
    for (std::size_t j = 0; j < eta_r.size(); ++j) v.segment<3>(static_cast<Eigen::Index>(3 * j)) = eta_r[j];
    v[v.size() - 1] = eta_m;
    return v;
  }
};

/// Bound on the network average: each agent's bound weighted by its share of
/// the total precision of the corresponding parameter.
inline EtaHat aggregate_eta(std::span<const AgentBoundTerms> agents) {
  const std::size_t n = agents.size();
  if (n == 0) throw std::invalid_argument("aggregate_eta: no agents");
  const TranslationalLayout lay{n};
  for (const auto& a : agents) {
    if (static_cast<std::size_t>(a.eta.size()) != lay.dim() ||
        static_cast<std::size_t>(a.decomposed_var.size()) != lay.dim()) {
      throw std::invalid_argument("aggregate_eta: dimension mismatch");
    }
    if ((a.decomposed_var.array() <= 0.0).any()) throw std::invalid_argument("aggregate_eta: nonpositive variance");
  }
  EtaHat out;
  out.eta_r.assign(n, Vec3::Zero());
  for (std::size_t j = 0; j < n; ++j) {
    const auto rj = static_cast<Eigen::Index>(3 * j);
    Vec3 total_precision = Vec3::Zero();
    for (const auto& a : agents) total_precision += a.decomposed_var.segment<3>(rj).cwiseInverse();
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 term = agents[i].rho;
      if (j != i) term += agents[i].eta.segment<3>(static_cast<Eigen::Index>(lay.rel_offset(j, i)));
      const Vec3 weight = agents[i].decomposed_var.segment<3>(rj).cwiseInverse().cwiseQuotient(total_precision);
      out.eta_r[j] += term.cwiseProduct(weight);
    }
  }
  const auto mi = static_cast<Eigen::Index>(lay.mass());
  double total = 0.0;
  for (const auto& a : agents) total += 1.0 / a.decomposed_var[mi];
  for (const auto& a : agents) out.eta_m += a.eta[mi] / (a.decomposed_var[mi] * total);
  return out;
}

}  // namespace coopbayes
