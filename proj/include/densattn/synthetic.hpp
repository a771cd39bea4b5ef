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

#ifndef DENSATTN_SYNTHETIC_HPP
#define DENSATTN_SYNTHETIC_HPP

#include "densattn/density.hpp"
#include "densattn/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace densattn {

/// Gaussian-blob "heads" on a textured noise background.
struct SyntheticSpec {
  int images = 5;
  Index height = 32;
  Index width = 32;
  /// Inclusive [lo, hi] head-count ranges; each image picks one uniformly.
  std::vector<std::pair<int, int>> count_bins{{2, 6}, {7, 12}};
  double head_radius = 1.2;
  double margin = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticImage {
  std::string id;
  TensorD image;  // [1, 3, H, W] in [0, 1]
  PointAnnotation annotation;
};

std::vector<SyntheticImage> make_synthetic(const SyntheticSpec& spec);

}  // namespace densattn

#endif  // DENSATTN_SYNTHETIC_HPP
