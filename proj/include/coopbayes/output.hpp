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

// CSV and manifest emission. Numbers use the shortest round-trip decimal
// form, so identical results give byte-identical files.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopbayes/config.hpp"
#include "coopbayes/scenario.hpp"

namespace coopbayes {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kEstimatesHeader = "time,agent,quantity,index,mean,variance,truth,bound";
inline constexpr const char* kMetricsHeader = "time,agent,e_m,e_r,e_J";

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

/// Quantity names in output order: m_o, r_1 .. r_N, J.
inline std::vector<std::string> quantity_names(std::size_t n) {
  std::vector<std::string> q{"m_o"};
  for (std::size_t j = 0; j < n; ++j) q.push_back("r_" + std::to_string(j + 1));
  q.emplace_back("J");
  return q;
}

/// Rows per agent per recorded step: 1 (m_o) + 3N (offsets) + 6 (inertia).
inline std::size_t rows_per_agent(std::size_t n) { return 1 + 3 * n + 6; }

namespace output_detail {

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(p.string() + ": cannot open for writing");
  return out;
}

inline void close(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw OutputError(p.string() + ": write failed");
}

inline void row(std::ofstream& out, const std::string& t, std::size_t agent, const std::string& q, std::size_t idx,
                double mean, double var, double truth, double bound) {
  out << t << ',' << agent << ',' << q << ',' << idx << ',' << format_number(mean) << ',' << format_number(var) << ','
      << format_number(truth) << ',' << format_number(bound) << '\n';
}

}  // namespace output_detail

/// Writes estimates.csv (long format), metrics.csv and manifest.json into
/// `out_dir`, creating it if needed. Agents are numbered from 1.
inline void write_results(const RunResult& result, const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  using namespace output_detail;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw OutputError(out_dir.string() + ": " + ec.message());

  const std::size_t n = result.num_agents;
  const auto mi = static_cast<Eigen::Index>(3 * n);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const auto est_path = out_dir / "estimates.csv";
  auto est = open(est_path);
  est << kEstimatesHeader << '\n';
  const auto met_path = out_dir / "metrics.csv";
  auto met = open(met_path);
  met << kMetricsHeader << '\n';

  for (const StepRecord& s : result.steps) {
    const std::string t = format_number(s.time);
    for (std::size_t i = 0; i < n; ++i) {
      const AgentRecord& a = s.agents[i];
      const std::size_t agent = i + 1;
      row(est, t, agent, "m_o", 0, a.mean[mi], a.var[mi], result.truth[mi], s.bound[mi]);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < 3; ++c) {
          const auto k = static_cast<Eigen::Index>(3 * j + c);
          row(est, t, agent, "r_" + std::to_string(j + 1), c, a.mean[k], a.var[k], result.truth[k], s.bound[k]);
        }
      }
      for (std::size_t c = 0; c < 6; ++c) {
        const auto k = static_cast<Eigen::Index>(c);
        row(est, t, agent, "J", c, a.j_mean[k], a.j_var[k], result.truth_J[k], nan);
      }
      met << t << ',' << agent << ',' << format_number(a.errors.e_m) << ',' << format_number(a.errors.e_r) << ','
          << format_number(a.errors.e_J) << '\n';
    }
  }
  close(est, est_path);
  close(met, met_path);

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.source;
  manifest["agents"] = n;
  manifest["recorded_steps"] = result.steps.size();
  manifest["counters"] = {{"ratio_holds", result.counters.ratio_holds},
                          {"precision_holds", result.counters.precision_holds},
                          {"assumption4_failures", result.counters.assumption4_failures}};
  manifest["max_rigidity_drift"] = result.max_rigidity_drift;
  const auto man_path = out_dir / "manifest.json";
  auto man = open(man_path);
  man << manifest.dump(2) << '\n';
  close(man, man_path);
}

}  // namespace coopbayes
