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

// Recursive Bayesian linear regression, generalized product of experts, and
// the Gaussian ratio/sum algebra that turns an agent's fused belief over
// theta_i into marginals over [^o r_1 ... ^o r_N, m_o].

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "coopbayes/geometry.hpp"
#include "coopbayes/regression.hpp"

namespace coopbayes {

struct GaussianBelief {
  VecX mu;
  MatX Sigma;

  Eigen::Index dim() const { return mu.size(); }
};

/// Means and elementwise (marginal) variances.
struct MarginalGaussian {
  VecX mean;
  VecX var;
};

struct ScalarGaussian {
  double mean = 0.0;
  double var = 0.0;
};

/// Thrown when a ratio denominator mean is too close to zero to divide by;
/// the excitation has not yet made m_o identifiable.
class DenominatorNearZero : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kCholeskyJitter = 1e-12;
inline constexpr double kDefaultRatioGuard = 1e-3;

/// Inverse of a symmetric positive definite matrix via Cholesky; retries with
/// growing diagonal jitter if the factorization fails.
inline MatX spd_inverse(const MatX& m) {
  const auto n = m.rows();
  MatX a = 0.5 * (m + m.transpose());
  double jitter = kCholeskyJitter;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<MatX> llt(a);
    if (llt.info() == Eigen::Success) {
      MatX inv = llt.solve(MatX::Identity(n, n));
      return 0.5 * (inv + inv.transpose());
    }
    a.diagonal().array() += jitter;
    jitter *= 100.0;
  }
  throw std::domain_error("spd_inverse: matrix is not positive definite");
}

inline bool is_spd(const MatX& m) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + m.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<MatX> llt(m);
  return llt.info() == Eigen::Success;
}

/// Posterior after one scalar observation t = phi^T theta + eps,
/// eps ~ N(0, 1/beta):
///   Sigma' = (Sigma^-1 + beta phi phi^T)^-1,  mu' = Sigma'(Sigma^-1 mu + beta phi t),
/// evaluated as a rank-one correction of Sigma (no inversion).
inline GaussianBelief blr_update(const GaussianBelief& belief, const VecX& phi, double t, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("blr_update: beta must be positive");
  if (phi.size() != belief.dim() || belief.Sigma.rows() != belief.dim()) {
    throw std::invalid_argument("blr_update: dimension mismatch");
  }
  if (!is_spd(belief.Sigma)) throw std::invalid_argument("blr_update: prior covariance is not SPD");
  const VecX s_phi = belief.Sigma * phi;
  const double c = beta / (1.0 + beta * phi.dot(s_phi));
  GaussianBelief out;
  out.mu = belief.mu + c * (t - phi.dot(belief.mu)) * s_phi;
  out.Sigma = belief.Sigma - c * s_phi * s_phi.transpose();
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose());
  return out;
}

/// One BLR expert in information form. The precision matrix is held as a
/// Cholesky factor and updated by rank one per observation, so the cost per
/// sample is O(D^2) regardless of how many samples were seen.
class BlrExpert {
 public:
  BlrExpert() = default;
  explicit BlrExpert(const GaussianBelief& prior) {
    if (!is_spd(prior.Sigma)) throw std::invalid_argument("BlrExpert: prior covariance is not SPD");
    const MatX precision = spd_inverse(prior.Sigma);
    llt_.compute(precision);
    info_ = precision * prior.mu;
  }

  void update(const VecX& phi, double t, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("BlrExpert::update: beta must be positive");
    llt_.rankUpdate(phi, beta);
    info_ += beta * t * phi;
  }

  Eigen::Index dim() const { return info_.size(); }
  VecX mean() const { return llt_.solve(info_); }
  MatX precision() const { return llt_.reconstructedMatrix(); }
  /// Sigma^-1 mu
  const VecX& information() const { return info_; }
  MatX covariance() const {
    const MatX s = llt_.solve(MatX::Identity(dim(), dim()));
    return 0.5 * (s + s.transpose());
  }
  GaussianBelief belief() const { return {mean(), covariance()}; }

 private:
  Eigen::LLT<MatX> llt_;
  VecX info_;
};

/// Generalized product of M experts:
///   Sigma = M (sum Sigma_m^-1)^-1,  mu = (1/M) Sigma sum Sigma_m^-1 mu_m.
inline GaussianBelief gpoe(std::span<const GaussianBelief> beliefs) {
  if (beliefs.empty()) throw std::invalid_argument("gpoe: no experts");
  const auto d = beliefs.front().dim();
  const double m = static_cast<double>(beliefs.size());
  MatX precision = MatX::Zero(d, d);
  VecX info = VecX::Zero(d);
  for (const auto& b : beliefs) {
    if (b.dim() != d || b.Sigma.rows() != d) throw std::invalid_argument("gpoe: dimension mismatch");
    const MatX p = spd_inverse(b.Sigma);
    precision += p;
    info += p * b.mu;
  }
  GaussianBelief out;
  out.Sigma = m * spd_inverse(precision);
  out.mu = out.Sigma * info / m;
  return out;
}

/// gpoe over experts kept in information form; identical result without
/// re-inverting each expert covariance.
inline GaussianBelief gpoe(std::span<const BlrExpert> experts) {
  if (experts.empty()) throw std::invalid_argument("gpoe: no experts");
  const auto d = experts.front().dim();
  const double m = static_cast<double>(experts.size());
  MatX precision = MatX::Zero(d, d);
  VecX info = VecX::Zero(d);
  for (const auto& e : experts) {
    if (e.dim() != d) throw std::invalid_argument("gpoe: dimension mismatch");
    precision += e.precision();
    info += e.information();
  }
  precision /= m;
  info /= m;
  GaussianBelief out;
  out.Sigma = spd_inverse(precision);
  out.mu = out.Sigma * info;
  return out;
}

/// Moment-matched Gaussian for num / den (first-order Taylor). Variance is
/// written as num.var/den^2 + num^2 den.var/den^4, which is the usual
/// mean^2 (cv_num^2 + cv_den^2) but stays finite when num.mean == 0.
inline ScalarGaussian ratio_gaussian(const ScalarGaussian& num, const ScalarGaussian& den,
                                     double guard = kDefaultRatioGuard) {
  if (!(std::abs(den.mean) > guard)) {
    throw DenominatorNearZero("ratio_gaussian: |denominator mean| " + std::to_string(den.mean) +
                              " is within the guard " + std::to_string(guard));
  }
  const double d2 = den.mean * den.mean;
  return {num.mean / den.mean, num.var / d2 + num.mean * num.mean * den.var / (d2 * d2)};
}

inline ScalarGaussian sum_gaussian(const ScalarGaussian& a, const ScalarGaussian& b) {
  return {a.mean + b.mean, a.var + b.var};
}

/// Marginals of an agent's fused belief over theta_i, decomposed into
/// [^o r_1 ... ^o r_N, m_o]: the own offset through the ratio
/// (m_o ^o r_i) / m_o, the others by adding ^o r_{j,i}. Only diagonal
/// variances are used.
inline MarginalGaussian assemble_local(const GaussianBelief& belief, std::size_t i, std::size_t n,
                                       double guard = kDefaultRatioGuard) {
  const TranslationalLayout lay{n};
  if (static_cast<std::size_t>(belief.dim()) != lay.dim() || i >= n) {
    throw std::invalid_argument("assemble_local: belief dimension does not match 3N+1");
  }
  const auto at = [&](std::size_t k) {
    const auto e = static_cast<Eigen::Index>(k);
    return ScalarGaussian{belief.mu[e], belief.Sigma(e, e)};
  };
  const ScalarGaussian mass = at(lay.mass());

  MarginalGaussian out{VecX(lay.dim()), VecX(lay.dim())};
  const auto put = [&](std::size_t k, const ScalarGaussian& g) {
    out.mean[static_cast<Eigen::Index>(k)] = g.mean;
    out.var[static_cast<Eigen::Index>(k)] = g.var;
  };
  std::array<ScalarGaussian, 3> own;
  for (std::size_t c = 0; c < 3; ++c) {
    own[c] = ratio_gaussian(at(lay.scaled_offset() + c), mass, guard);
    put(3 * i + c, own[c]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    for (std::size_t c = 0; c < 3; ++c) put(3 * j + c, sum_gaussian(own[c], at(lay.rel_offset(j, i) + c)));
  }
  put(lay.mass(), mass);
  return out;
}

}  // namespace coopbayes
