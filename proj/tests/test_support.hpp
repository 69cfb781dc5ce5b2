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

#pragma once

#include <random>
#include <string>

#include "coopbayes/config.hpp"
#include "coopbayes/geometry.hpp"

namespace coopbayes::testing {

inline std::string source_path(const std::string& rel) { return std::string(COOPBAYES_SOURCE_DIR) + "/" + rel; }

inline ScenarioConfig four_agent_config() { return load_config(source_path("configs/paper_sec4.json")); }

inline double uniform(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  return {scale * uniform(rng), scale * uniform(rng), scale * uniform(rng)};
}

inline VecX random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  VecX v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = scale * uniform(rng);
  return v;
}

inline UnitQuaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng), n(rng), n(rng)};
}

inline MatX random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1) {
  MatX a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) a(r, c) = uniform(rng);
  }
  return a * a.transpose() + floor * MatX::Identity(n, n);
}

inline Mat3 random_sym3(std::mt19937_64& rng) {
  Mat3 a;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a(r, c) = uniform(rng);
  }
  return a + a.transpose();
}

}  // namespace coopbayes::testing
