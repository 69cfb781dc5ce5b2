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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "coopbayes/bayes.hpp"
#include "coopbayes/consensus.hpp"
#include "coopbayes/output.hpp"
#include "coopbayes/regression.hpp"
#include "coopbayes/scenario.hpp"
#include "test_support.hpp"

namespace {

using namespace coopbayes;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const StepRecord& record_at(const RunResult& r, double t) {
  const auto it = std::min_element(r.steps.begin(), r.steps.end(), [t](const StepRecord& a, const StepRecord& b) {
    return std::abs(a.time - t) < std::abs(b.time - t);
  });
  return *it;
}

// 1. Four-agent scenario over seeds 1..10; medians pool every agent of every seed.
Outcome four_agent_reproduction() {
  ScenarioConfig cfg = testing::four_agent_config();
  std::vector<double> em, er, ej;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    const RunResult r = run_scenario(cfg);
    for (const auto& a : record_at(r, 1.0).agents) {
      em.push_back(a.errors.e_m);
      er.push_back(a.errors.e_r);
    }
    for (const auto& a : record_at(r, 7.0).agents) ej.push_back(a.errors.e_J);
  }
  const double secs = seconds_since(t0);
  const double m = median(em), r = median(er), j = median(ej);
  return {m <= 0.02 && r <= 0.05 && j <= 0.2 && secs < 60.0,
          fmt("median e_m(1s)=%.4f (<=0.02) e_r(1s)=%.4f (<=0.05) e_J(7s)=%.4f (<=0.2) runtime=%.1fs (<60)", m, r, j,
              secs)};
}

// 2. Substitute the true parameters into both models along a noise-free run
// whose desired motion is planned from perturbed offsets.
Outcome model_consistency() {
  const ScenarioConfig cfg = testing::four_agent_config();
  const std::size_t n = cfg.num_agents();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> planned(n), bias(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) planned[i][k] = cfg.grasp.geometry.offsets[i][k] + 0.1 * unit(rng);
    bias[i] = cfg.grasp.geometry.offsets[i] - planned[i];
  }
  DesiredTrajectory traj({}, cfg.excitation, cfg.dt, planned, cfg.grasp.orientations, bias, cfg.desired_wrenches);
  CoupledSim sim(cfg.agents, cfg.object, cfg.grasp, WorldState{}, std::move(traj));
  const Vec6 theta_r = vec6(cfg.object.J_body);
  double worst_t = 0.0, worst_r = 0.0;
  for (std::size_t k = 0; k <= cfg.total_steps(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const LocalInfo info{sim.agent(i), sim.desired(), sim.agents(), sim.grasp().orientations, sim.object().g};
      const auto ts = build_translational_sample(info, i);
      const auto rs = build_rotational_sample(info, cfg.grasp.geometry.offsets, i);
      const VecX theta = make_translational_theta(cfg.grasp.geometry, cfg.object.m_o, i);
      worst_t = std::max(worst_t, (ts.y - ts.Phi * theta).lpNorm<Eigen::Infinity>());
      worst_r = std::max(worst_r, (rs.y - rs.Phi * theta_r).lpNorm<Eigen::Infinity>());
    }
    sim.advance();
  }
  return {worst_t < 1e-8 && worst_r < 1e-8,
          fmt("max residual translational=%.2e rotational=%.2e over 7 s (<1e-8)", worst_t, worst_r)};
}

// 3. Recursive updates against the batch posterior from a general LU inverse.
Outcome blr_equivalence() {
  std::mt19937_64 rng(3);
  double worst = 0.0, min_eig = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const auto d = static_cast<Eigen::Index>(1 + rng() % 13);
    const auto k = static_cast<Eigen::Index>(1 + rng() % 200);
    const double beta = std::exp(testing::uniform(rng, std::log(0.1), std::log(10.0)));
    const GaussianBelief prior{testing::random_vec(rng, d, 2.0), testing::random_spd(rng, d, 0.5)};
    MatX phi(k, d);
    VecX t(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      phi.row(r) = testing::random_vec(rng, d).transpose();
      t[r] = testing::uniform(rng, -5.0, 5.0);
    }
    GaussianBelief b = prior;
    BlrExpert e(prior);
    for (Eigen::Index r = 0; r < k; ++r) {
      const GaussianBelief next = blr_update(b, phi.row(r).transpose(), t[r], beta);
      const Eigen::SelfAdjointEigenSolver<MatX> es(b.Sigma - next.Sigma);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff() / b.Sigma.norm());
      b = next;
      e.update(phi.row(r).transpose(), t[r], beta);
    }
    const MatX p0 = prior.Sigma.fullPivLu().inverse();
    const MatX sigma = (p0 + beta * phi.transpose() * phi).fullPivLu().inverse();
    const VecX mu = sigma * (p0 * prior.mu + beta * phi.transpose() * t);
    const auto rel = [](const MatX& a, const MatX& ref) { return (a - ref).norm() / std::max(1.0, ref.norm()); };
    worst = std::max({worst, rel(b.mu, mu), rel(b.Sigma, sigma), rel(e.mean(), mu), rel(e.covariance(), sigma)});
  }
  return {worst < 1e-9 && min_eig >= -1e-12,
          fmt("100 instances: max relative deviation=%.2e (<1e-9), min eig(Sigma_k - Sigma_k+1)=%.2e (>=-1e-12)", worst,
              min_eig)};
}

// 4. Ring graph from the four-agent config, static scalar inputs 0..3.
Outcome consensus_static() {
  const ScenarioConfig cfg = testing::four_agent_config();
  const std::vector<VecX> psis{VecX::Constant(1, 0.0), VecX::Constant(1, 1.0), VecX::Constant(1, 2.0),
                               VecX::Constant(1, 3.0)};
  auto s = consensus_init(psis);
  double sum_err = 0.0;
  for (int k = 0; k < 200; ++k) {
    s = consensus_step(s, psis, cfg.graph);
    double sum = 0.0;
    for (const auto& st : s) sum += st.xi[0];
    sum_err = std::max(sum_err, std::abs(sum - 6.0));
  }
  double dev = 0.0;
  for (const auto& st : s) dev = std::max(dev, std::abs(st.xi[0] - 1.5));
  return {dev < 1e-10 && sum_err < 1e-12,
          fmt("max |xi - mean| after 200 steps=%.2e (<1e-10), max sum error=%.2e (<1e-12)", dev, sum_err)};
}

// 5. Final-step coverage on the three-agent coverage scenario.
Outcome coverage() {
  const ScenarioConfig cfg = load_config(testing::source_path("configs/coverage_n3.json"));
  const auto t0 = Clock::now();
  const CoverageReport rep = run_coverage(cfg, 500, 0.1);
  const double secs = seconds_since(t0);
  return {rep.fraction() >= 0.87 && secs < 600.0,
          fmt("coverage_n3: %zu/%zu covered=%.3f (>=0.87), invalid bounds=%zu, runtime=%.1fs (<600)", rep.covered,
              rep.trials, rep.fraction(), rep.invalid_bounds, secs)};
}

// 6. Kolmogorov-Smirnov distance of the moment-matched ratio to sampled ratios.
Outcome ratio_ks() {
  struct Case {
    double nm, ncv, dm, dcv;
  };
  const std::vector<Case> cases{{3.25, 0.06, 10.0, 0.01}, {1.0, 0.099, 2.0, 0.099}, {-4.0, 0.05, 0.5, 0.08},
                                {0.3, 0.09, -7.0, 0.02}};
  std::mt19937_64 rng(6);
  double worst = 0.0;
  const int n = 1000000;
  std::vector<double> x(n);
  for (const Case& c : cases) {
    const ScalarGaussian num{c.nm, std::pow(c.ncv * c.nm, 2)}, den{c.dm, std::pow(c.dcv * c.dm, 2)};
    const ScalarGaussian g = ratio_gaussian(num, den);
    std::normal_distribution<double> a(num.mean, std::sqrt(num.var)), b(den.mean, std::sqrt(den.var));
    for (auto& v : x) v = a(rng) / b(rng);
    std::sort(x.begin(), x.end());
    const double sd = std::sqrt(g.var);
    double ks = 0.0;
    for (int k = 0; k < n; ++k) {
      const double f = 0.5 * std::erfc(-(x[static_cast<std::size_t>(k)] - g.mean) / (sd * std::sqrt(2.0)));
      ks = std::max({ks, std::abs(f - static_cast<double>(k) / n), std::abs(f - static_cast<double>(k + 1) / n)});
    }
    worst = std::max(worst, ks);
  }
  return {worst < 0.05, fmt("max KS distance over %zu cases with CV<0.1: %.4f (<0.05)", cases.size(), worst)};
}

// 7. Grasp offsets recomputed from simulated poses over the four-agent run.
Outcome rigidity() {
  const ScenarioConfig cfg = testing::four_agent_config();
  const RunResult r = run_scenario(cfg, {.record_all_steps = false});
  return {r.max_rigidity_drift < 1e-6,
          fmt("max offset drift over %.0f s at dt=%g: %.2e (<1e-6)", cfg.duration, cfg.dt, r.max_rigidity_drift)};
}

// 8. Two runs, same config and seed, compared byte for byte.
Outcome determinism() {
  const ScenarioConfig cfg = testing::four_agent_config();
  const fs::path base = fs::temp_directory_path() / ("coopbayes_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  write_results(run_scenario(cfg), cfg, base / "a");
  write_results(run_scenario(cfg), cfg, base / "b");
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool same = true;
  std::size_t bytes = 0;
  for (const char* f : {"estimates.csv", "metrics.csv"}) {
    const std::string a = slurp(base / "a" / f), b = slurp(base / "b" / f);
    same = same && !a.empty() && a == b;
    bytes += a.size();
  }
  fs::remove_all(base);
  return {same, fmt("estimates.csv and metrics.csv %s (%zu bytes)", same ? "identical" : "differ", bytes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"four-agent reproduction", four_agent_reproduction}, {"model consistency", model_consistency},
      {"BLR batch equivalence", blr_equivalence}, {"consensus on static inputs", consensus_static},
      {"bound coverage", coverage},               {"ratio approximation", ratio_ks},
      {"grasp rigidity", rigidity},               {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
