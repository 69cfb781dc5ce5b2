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

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "coopbayes/consensus.hpp"
#include "test_support.hpp"

namespace coopbayes {
namespace {

using testing::random_vec;
using testing::uniform;

CommGraph ring_graph() {
  MatX a = MatX::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    a(i, i) = 1.0 / 3.0;
    a(i, (i + 1) % 4) = 1.0 / 3.0;
    a(i, (i + 3) % 4) = 1.0 / 3.0;
  }
  return {a, 0.1};
}

MatX permutation(const std::vector<int>& p) {
  const auto n = static_cast<Eigen::Index>(p.size());
  MatX m = MatX::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, p[static_cast<std::size_t>(i)]) = 1.0;
  return m;
}

// Doubly stochastic: mix of identity, a directed cycle and a random permutation.
CommGraph random_balanced(std::mt19937_64& rng, int n) {
  std::vector<int> cyc(static_cast<std::size_t>(n)), perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cyc[static_cast<std::size_t>(i)] = (i + 1) % n;
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const double w0 = uniform(rng, 0.2, 0.4), w1 = uniform(rng, 0.3, 0.5);
  return {w0 * MatX::Identity(n, n) + w1 * permutation(cyc) + (1.0 - w0 - w1) * permutation(perm), 0.1};
}

std::vector<VecX> run(const CommGraph& g, const std::vector<VecX>& psis, int iters) {
  auto s = consensus_init(psis);
  for (int k = 0; k < iters; ++k) s = consensus_step(s, psis, g);
  std::vector<VecX> out;
  for (const auto& st : s) out.push_back(st.xi);
  return out;
}

TEST(ValidateGraph, FourAgentRingIsValid) {
  EXPECT_TRUE(validate_graph(ring_graph().A, 0.1).empty());
  EXPECT_TRUE(validate_graph(testing::four_agent_config().graph.A, 0.1).empty());
}

TEST(ValidateGraph, IdentityIsNotConnected) {
  const auto v = validate_graph(MatX::Identity(3, 3), 0.1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("strongly connected"), std::string::npos);
}

TEST(ValidateGraph, UnbalancedGraph) {
  MatX a(3, 3);
  a << 0.5, 0.5, 0.0,
       0.5, 0.5, 0.0,
       0.25, 0.25, 0.5;
  const auto v = validate_graph(a, 0.1);
  EXPECT_FALSE(v.empty());
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s.find("balanced") != std::string::npos; }));
}

TEST(ValidateGraph, RowSumAndSmallWeights) {
  MatX a = ring_graph().A;
  a(0, 1) = 0.3;
  EXPECT_FALSE(validate_graph(a, 0.1).empty());
  EXPECT_FALSE(validate_graph(ring_graph().A, 0.5).empty());
  EXPECT_FALSE(validate_graph(MatX::Zero(2, 3), 0.1).empty());
}

TEST(Psi, Example) {
  const MarginalGaussian m{Vec3(1.0, -2.0, 0.0), Vec3(0.5, 4.0, 2.0)};
  const VecX psi = psi_transform(m);
  VecX expect(6);
  expect << 2.0, -0.5, 0.0, 2.0, 0.25, 0.5;
  EXPECT_EQ(psi, expect);
}

TEST(Psi, ZetaRoundTrip) {
  std::mt19937_64 rng(51);
  const MarginalGaussian m{random_vec(rng, 7, 3.0), random_vec(rng, 7).cwiseAbs().array() + 0.01};
  const MarginalGaussian back = zeta_transform(psi_transform(m));
  EXPECT_LT((back.mean - m.mean).norm(), 1e-12);
  EXPECT_LT((back.var - m.var).norm(), 1e-12);
}

TEST(Psi, GuardsAndErrors) {
  EXPECT_THROW(psi_transform({Vec3::Ones(), Vec3(1.0, 0.0, 1.0)}), std::domain_error);
  VecX xi(4);
  xi << 1.0, 1.0, 1.0, 0.0;
  EXPECT_THROW(zeta_transform(xi), NonpositivePrecision);
  EXPECT_THROW(zeta_transform(VecX::Ones(3)), std::invalid_argument);
}

TEST(Consensus, IdenticalInputsAreAFixedPoint) {
  std::mt19937_64 rng(52);
  const VecX p = random_vec(rng, 5);
  const std::vector<VecX> psis(4, p);
  for (const auto& xi : run(ring_graph(), psis, 50)) EXPECT_LT((xi - p).norm(), 1e-15);
}

TEST(Consensus, StaticScalarsReachTheMean) {
  const std::vector<VecX> psis{VecX::Constant(1, 0.0), VecX::Constant(1, 1.0), VecX::Constant(1, 2.0),
                               VecX::Constant(1, 3.0)};
  const CommGraph g = ring_graph();
  auto s = consensus_init(psis);
  for (int k = 0; k < 200; ++k) {
    s = consensus_step(s, psis, g);
    double sum = 0.0;
    for (const auto& st : s) sum += st.xi[0];
    EXPECT_NEAR(sum, 6.0, 1e-12);
  }
  for (const auto& st : s) EXPECT_NEAR(st.xi[0], 1.5, 1e-10);
}

TEST(Consensus, TracksTheCurrentSumForVaryingInputs) {
  std::mt19937_64 rng(53);
  const CommGraph g = random_balanced(rng, 6);
  std::vector<VecX> psis(6);
  for (auto& p : psis) p = random_vec(rng, 3);
  auto s = consensus_init(psis);
  for (int k = 0; k < 100; ++k) {
    for (auto& p : psis) p += random_vec(rng, 3, 0.1);
    s = consensus_step(s, psis, g);
    VecX lhs = VecX::Zero(3), rhs = VecX::Zero(3);
    for (std::size_t i = 0; i < 6; ++i) {
      lhs += s[i].xi;
      rhs += psis[i];
    }
    EXPECT_LT((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Consensus, ConvergedOutputIsThePrecisionWeightedAverage) {
  std::mt19937_64 rng(54);
  std::vector<MarginalGaussian> local;
  std::vector<GaussianBelief> beliefs;
  std::vector<VecX> psis;
  for (int i = 0; i < 4; ++i) {
    const VecX var = random_vec(rng, 4).cwiseAbs().array() + 0.1;
    local.push_back({random_vec(rng, 4, 2.0), var});
    beliefs.push_back({local.back().mean, MatX(var.asDiagonal())});
    psis.push_back(psi_transform(local.back()));
  }
  const GaussianBelief expect = gpoe(beliefs);
  for (const auto& xi : run(ring_graph(), psis, 300)) {
    const MarginalGaussian m = zeta_transform(xi);
    EXPECT_LT((m.mean - expect.mu).norm(), 1e-10);
    EXPECT_LT((m.var - expect.Sigma.diagonal()).norm(), 1e-10);
  }
}

TEST(Consensus, RandomBalancedGraphsConverge) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const CommGraph g = random_balanced(rng, n);
    ASSERT_TRUE(validate_graph(g.A, g.alpha).empty());
    std::vector<VecX> psis(static_cast<std::size_t>(n));
    VecX mean = VecX::Zero(3);
    for (auto& p : psis) {
      p = random_vec(rng, 3, 5.0);
      mean += p / n;
    }
    for (const auto& xi : run(g, psis, 500)) EXPECT_LT((xi - mean).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Consensus, RelabelingAgentsPermutesTheResult) {
  std::mt19937_64 rng(56);
  const CommGraph g = random_balanced(rng, 5);
  std::vector<VecX> psis(5);
  for (auto& p : psis) p = random_vec(rng, 2);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  const MatX p = permutation(perm);
  const CommGraph gp{p * g.A * p.transpose(), g.alpha};
  std::vector<VecX> psis_p(5);
  for (std::size_t i = 0; i < 5; ++i) psis_p[i] = psis[static_cast<std::size_t>(perm[i])];
  const auto a = run(g, psis, 7);
  const auto b = run(gp, psis_p, 7);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_LT((b[i] - a[static_cast<std::size_t>(perm[i])]).norm(), 1e-14);
}

TEST(Consensus, RejectsMismatchedSizes) {
  const std::vector<VecX> psis(3, VecX::Ones(2));
  const auto s = consensus_init(psis);
  EXPECT_THROW(consensus_step(s, psis, ring_graph()), std::invalid_argument);
}

TEST(ConsensusNetwork, HoldsLastValidOutput) {
  ConsensusNetwork net(ring_graph());
  EXPECT_FALSE(net.initialized());
  std::vector<VecX> psis(4, VecX(2));
  for (auto& p : psis) p << 1.0, 1.0;
  net.update(psis);
  ASSERT_TRUE(net.output(0).has_value());
  EXPECT_DOUBLE_EQ(net.output(0)->mean[0], 1.0);

  // Precision jumps to zero on one agent; the transient dip below the guard keeps the previous output.
  psis[0] << 0.0, -3.0;
  net.update(psis);
  EXPECT_GT(net.held_count(), 0u);
  EXPECT_DOUBLE_EQ(net.output(0)->mean[0], 1.0);
}

}  // namespace
}  // namespace coopbayes
