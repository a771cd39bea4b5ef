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

#ifndef DENSATTN_DENSITY_HPP
#define DENSATTN_DENSITY_HPP

#include "densattn/tensor.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace densattn {

/// Head position in pixel space; pixel (row i, col j) covers [j, j+1) x [i, i+1).
struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct PointAnnotation {
  std::string image_id;
  Index width = 0;
  Index height = 0;
  std::vector<Point> points;
};

struct AdaptiveKernel {
  double beta = 0.3;
  int k = 3;
};

struct FixedKernel {
  double sigma = 15.0;
};

/// Gaussian kernel choice for ground-truth generation.
struct KernelSpec {
  std::variant<AdaptiveKernel, FixedKernel> variant = AdaptiveKernel{};
  // Kernels are cut at a square window of radius ceil(truncation * sigma).
  double truncation = 4.0;

  static KernelSpec adaptive(double beta = 0.3, int k = 3) { return {AdaptiveKernel{beta, k}}; }
  static KernelSpec fixed(double sigma = 15.0) { return {FixedKernel{sigma}}; }

  bool is_adaptive() const { return std::holds_alternative<AdaptiveKernel>(variant); }
  void validate() const;

  /// "adaptive:beta=0.3,k=3" or "fixed:sigma=15" (optionally ",trunc=3").
  static KernelSpec parse(std::string_view text);
  std::string str() const;
};

inline constexpr double kFallbackSigma = 15.0;
inline constexpr double kMinSigma = 0.5;

using DensityGrid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Non-negative H x W grid whose sum estimates the head count.
struct DensityMap {
  DensityGrid values;

  DensityMap() = default;
  DensityMap(Index height, Index width) : values(DensityGrid::Zero(height, width)) {}
  explicit DensityMap(DensityGrid v) : values(std::move(v)) {}

  Index height() const { return values.rows(); }
  Index width() const { return values.cols(); }
  double count() const;
};

/// Mean Euclidean distance from each point to its k nearest other points
/// (all others when fewer than k exist). nullopt for fewer than two points.
std::optional<std::vector<double>> knn_mean_distance(std::span<const Point> points, int k);

struct DensityDiagnostics {
  std::vector<double> sigmas;  // per point, after clamping
  std::vector<std::string> warnings;
  bool used_fallback = false;
  Index clamped = 0;
};

/// Sum of one pixel-integrated, truncated Gaussian per head.
DensityMap generate_density_map(const PointAnnotation& ann, const KernelSpec& spec,
                                DensityDiagnostics* diagnostics = nullptr);

/// Deposits one kernel of parameter sigma centred at p into `map`.
void splat_gaussian(DensityMap& map, Point p, double sigma, double truncation);

/// Block sums over factor x factor cells; trailing partial blocks are
/// zero-padded (and *padded set) when factor does not divide a dimension.
DensityMap downsample_sum(const DensityMap& map, Index factor, bool* padded = nullptr);

DensityMap crop(const DensityMap& map, Index top, Index left, Index height, Index width);
DensityMap flip_horizontal(const DensityMap& map);

/// True when p is at least `margin` away from every image border.
bool is_interior(Point p, double margin, Index width, Index height);

}  // namespace densattn

#endif  // DENSATTN_DENSITY_HPP
