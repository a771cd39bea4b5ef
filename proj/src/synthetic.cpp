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

#include "densattn/synthetic.hpp"

#include "densattn/init.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace densattn {

void SyntheticSpec::validate() const {
  if (images < 1) throw ShapeError("synthetic: images must be >= 1");
  if (height < 1 || width < 1) throw ShapeError("synthetic: height and width must be >= 1");
  if (count_bins.empty()) throw ShapeError("synthetic: count_bins must not be empty");
  for (const auto& [lo, hi] : count_bins) {
    if (lo < 0 || hi < lo) throw ShapeError(fmt::format("synthetic: bad count bin [{}, {}]", lo, hi));
  }
  if (!(head_radius > 0.0)) throw ShapeError("synthetic: head_radius must be > 0");
  if (margin < 0.0 || 2.0 * margin >= static_cast<double>(std::min(height, width))) {
    throw ShapeError("synthetic: margin leaves no room for heads");
  }
}

std::vector<SyntheticImage> make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_bin(0, spec.count_bins.size() - 1);
  const Index h = spec.height;
  const Index w = spec.width;

  std::vector<SyntheticImage> out;
  for (int i = 0; i < spec.images; ++i) {
    SyntheticImage img;
    img.id = fmt::format("synth_{:03d}", i);
    img.annotation.image_id = img.id;
    img.annotation.width = w;
    img.annotation.height = h;

    const auto [lo, hi] = spec.count_bins[pick_bin(rng)];
    const int count = std::uniform_int_distribution<int>(lo, hi)(rng);
    std::uniform_real_distribution<double> px(spec.margin, static_cast<double>(w) - spec.margin);
    std::uniform_real_distribution<double> py(spec.margin, static_cast<double>(h) - spec.margin);
    for (int k = 0; k < count; ++k) img.annotation.points.push_back({px(rng), py(rng)});

    // Background: two random low-frequency waves per channel plus pixel noise.
    img.image = TensorD({1, 3, h, w});
    for (Index c = 0; c < 3; ++c) {
      const double fx = 0.05 + 0.3 * unit(rng);
      const double fy = 0.05 + 0.3 * unit(rng);
      const double phase = 6.283185307179586 * unit(rng);
      const double base = 0.15 + 0.2 * unit(rng);
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          const double wave = 0.08 * std::sin(fx * static_cast<double>(x) + phase) *
                              std::cos(fy * static_cast<double>(y));
          img.image.at(0, c, y, x) = base + wave + 0.05 * unit(rng);
        }
      }
    }
    const double r2 = 2.0 * spec.head_radius * spec.head_radius;
    for (const auto& p : img.annotation.points) {
      const double tint = 0.4 + 0.3 * unit(rng);
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - p.x;
          const double dy = static_cast<double>(y) + 0.5 - p.y;
          const double blob = std::exp(-(dx * dx + dy * dy) / r2);
          for (Index c = 0; c < 3; ++c) img.image.at(0, c, y, x) += (c == 0 ? tint : 0.6 * tint) * blob;
        }
      }
    }
    auto& values = img.image.mutable_data();
    values = values.cwiseMax(0.0).cwiseMin(1.0);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace densattn
