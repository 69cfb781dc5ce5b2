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

// Communication graph checks and dynamic average consensus over
// precision-weighted Gaussian marginals.

#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopbayes/bayes.hpp"
#include "coopbayes/geometry.hpp"

namespace coopbayes {

struct CommGraph {
  MatX A;
  double alpha = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(A.rows()); }
};

inline constexpr double kStochasticTol = 1e-12;

namespace detail {

inline bool all_reachable(const MatX& a, bool transpose) {
  const auto n = a.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (Eigen::Index v = 0; v < n; ++v) {
      const double w = transpose ? a(v, u) : a(u, v);
      if (w != 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        stack.push_back(v);
      }
    }
  }
  for (bool s : seen) {
    if (!s) return false;
  }
  return true;
}

}  // namespace detail

/// Every violated clause of: row and column sums 1, A_ii >= alpha, nonzero
/// entries in [alpha, 1], nonzero pattern strongly connected. Empty means ok.
inline std::vector<std::string> validate_graph(const MatX& a, double alpha) {
  std::vector<std::string> out;
  if (a.rows() != a.cols() || a.rows() == 0) {
    out.push_back("adjacency matrix must be square and non-empty");
    return out;
  }
  if (!(alpha > 0.0)) out.push_back("alpha must be positive");
  const auto n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row = a.row(i).sum();
    const double col = a.col(i).sum();
    if (std::abs(row - 1.0) > kStochasticTol) {
      std::ostringstream s;
      s << "row " << i << " sums to " << row << ", expected 1";
      out.push_back(s.str());
    }
    if (std::abs(col - 1.0) > kStochasticTol) {
      std::ostringstream s;
      s << "column " << i << " sums to " << col << ", expected 1 (graph not balanced)";
      out.push_back(s.str());
    }
    if (a(i, i) < alpha) {
      std::ostringstream s;
      s << "self weight A(" << i << "," << i << ") = " << a(i, i) << " is below alpha " << alpha;
      out.push_back(s.str());
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = a(i, j);
      if (w != 0.0 && (w < alpha || w > 1.0)) {
        std::ostringstream s;
        s << "weight A(" << i << "," << j << ") = " << w << " outside {0} u [alpha, 1]";
        out.push_back(s.str());
      }
    }
  }
  if (!detail::all_reachable(a, false) || !detail::all_reachable(a, true)) {
    out.push_back("graph is not strongly connected");
  }
  return out;
}

/// psi = [mean / var ; 1 / var].
inline VecX psi_transform(const MarginalGaussian& m) {
  if (m.var.size() != m.mean.size()) throw std::invalid_argument("psi_transform: size mismatch");
  if ((m.var.array() <= 0.0).any()) throw std::domain_error("psi_transform: nonpositive variance");
  const auto d = m.mean.size();
  VecX psi(2 * d);
  psi.head(d) = m.mean.cwiseQuotient(m.var);
  psi.tail(d) = m.var.cwiseInverse();
  return psi;
}

class NonpositivePrecision : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kPrecisionGuard = 1e-12;

/// Inverse of psi_transform. Throws NonpositivePrecision while a precision
/// entry is still at or below the guard (consensus transient).
inline MarginalGaussian zeta_transform(const VecX& xi, double guard = kPrecisionGuard) {
  if (xi.size() % 2 != 0) throw std::invalid_argument("zeta_transform: odd dimension");
  const auto d = xi.size() / 2;
  const VecX prec = xi.tail(d);
  if ((prec.array() <= guard).any()) {
    throw NonpositivePrecision("zeta_transform: precision entry at or below guard");
  }
  return {xi.head(d).cwiseQuotient(prec), prec.cwiseInverse()};
}

struct ConsensusState {
  VecX xi;
  VecX psi_prev;
};

/// xi_i^(0) = psi_i^(0), psi^(-1) := psi^(0).
inline std::vector<ConsensusState> consensus_init(std::span<const VecX> psis) {
  std::vector<ConsensusState> out;
  out.reserve(psis.size());
  for (const auto& p : psis) out.push_back({p, p});
  return out;
}

/// One synchronous round:
///   xi_i <- xi_i + sum_{j != i} A_ij (xi_j - xi_i) + psi_i^(k) - psi_i^(k-1).
/// Reads only round-k values, so the result is independent of agent order.
inline std::vector<ConsensusState> consensus_step(std::span<const ConsensusState> states,
                                                  std::span<const VecX> psis, const CommGraph& graph) {
  const std::size_t n = states.size();
  if (psis.size() != n || graph.size() != n) throw std::invalid_argument("consensus_step: agent count mismatch");
  std::vector<ConsensusState> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const VecX& xi = states[i].xi;
    if (psis[i].size() != xi.size() || states[i].psi_prev.size() != xi.size()) {
      throw std::invalid_argument("consensus_step: dimension mismatch");
    }
    VecX next = xi + psis[i] - states[i].psi_prev;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = graph.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w != 0.0) next += w * (states[j].xi - xi);
    }
    out[i] = {std::move(next), psis[i]};
  }
  return out;
}

/// Network of consensus states with hold-last-valid output per agent.
class ConsensusNetwork {
 public:
  ConsensusNetwork(CommGraph graph, double guard = kPrecisionGuard)
      : graph_(std::move(graph)), guard_(guard) {}

  bool initialized() const { return !states_.empty(); }

  /// Feeds the current inputs and runs `iterations` rounds (inputs held fixed
  /// after the first).
  void update(std::span<const VecX> psis, int iterations = 1) {
    if (!initialized()) {
      states_ = consensus_init(psis);
      outputs_.assign(psis.size(), std::nullopt);
    } else {
      for (int it = 0; it < iterations; ++it) states_ = consensus_step(states_, psis, graph_);
    }
    for (std::size_t i = 0; i < states_.size(); ++i) {
      try {
        outputs_[i] = zeta_transform(states_[i].xi, guard_);
      } catch (const NonpositivePrecision&) {
        ++held_;
      }
    }
  }

  /// Latest valid fused marginal of agent i, if any.
  const std::optional<MarginalGaussian>& output(std::size_t i) const { return outputs_[i]; }
  const std::vector<ConsensusState>& states() const { return states_; }
  std::size_t held_count() const { return held_; }

 private:
  CommGraph graph_;
  double guard_;
  std::vector<ConsensusState> states_;
  std::vector<std::optional<MarginalGaussian>> outputs_;
  std::size_t held_ = 0;
};

}  // namespace coopbayes
