/*
 * Copyright 2026 The densattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Shared helpers for the unit tests.

#ifndef DENSATTN_TESTS_SUPPORT_HPP
#define DENSATTN_TESTS_SUPPORT_HPP

#include "densattn/init.hpp"
#include "densattn/oracles.hpp"
#include "densattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline densattn::oracle::Dims dims_of(const densattn::Shape& s) { return {s.n, s.c, s.h, s.w}; }

inline densattn::oracle::Values values_of(const densattn::TensorD& t) {
  return {t.data().data(), t.data().data() + t.size()};
}

inline double max_abs_diff(const densattn::TensorD& t, const densattn::oracle::Values& ref) {
  double worst = 0.0;
  for (densattn::Index i = 0; i < t.size(); ++i) {
    worst = std::max(worst, std::abs(t.data()(i) - ref[static_cast<std::size_t>(i)]));
  }
  return worst;
}

inline densattn::TensorD randn(const densattn::Shape& s, std::uint64_t seed, double stddev = 1.0) {
  densattn::Rng rng(seed);
  return densattn::gaussian<double>(s, stddev, rng);
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("densattn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

#endif  // DENSATTN_TESTS_SUPPORT_HPP
