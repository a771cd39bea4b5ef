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

#include "densattn/density.hpp"

#include "densattn/numeric.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace densattn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Mass of N(centre, sigma^2) inside [j, j+1) for j in [first, first + out.size()).
void cell_masses(double centre, double sigma, Index first, Eigen::ArrayXd& out) {
  const double scale = 1.0 / (sigma * std::sqrt(2.0));
  double lower = std::erf((static_cast<double>(first) - centre) * scale);
  for (Index j = 0; j < out.size(); ++j) {
    const double upper = std::erf((static_cast<double>(first + j + 1) - centre) * scale);
    out(j) = 0.5 * (upper - lower);
    lower = upper;
  }
}

}  // namespace

void KernelSpec::validate() const {
  if (!(truncation > 0.0)) throw ShapeError("kernel truncation must be > 0");
  if (const auto* a = std::get_if<AdaptiveKernel>(&variant)) {
    if (!(a->beta > 0.0)) throw ShapeError("adaptive kernel needs beta > 0");
    if (a->k < 1) throw ShapeError("adaptive kernel needs k >= 1");
  } else {
    const auto& f = std::get<FixedKernel>(variant);
    if (!(f.sigma > 0.0)) throw ShapeError("fixed kernel needs sigma > 0");
  }
}

KernelSpec KernelSpec::parse(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const std::string kind(trim(text.substr(0, colon)));
  KernelSpec spec;
  if (kind == "adaptive") {
    spec = adaptive();
  } else if (kind == "fixed") {
    spec = fixed();
  } else {
    throw ShapeError(fmt::format("unknown kernel '{}' (expected adaptive or fixed)", kind));
  }
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ShapeError(fmt::format("kernel option '{}' is not key=value", item));
    const std::string key(trim(item.substr(0, eq)));
    const std::string value(trim(item.substr(eq + 1)));
    double v = 0.0;
    try {
      v = std::stod(value);
    } catch (const std::exception&) {
      throw ShapeError(fmt::format("bad value '{}' for kernel option '{}'", value, key));
    }
    if (key == "trunc" || key == "truncation") {
      spec.truncation = v;
    } else if (auto* a = std::get_if<AdaptiveKernel>(&spec.variant); a && key == "beta") {
      a->beta = v;
    } else if (a && key == "k") {
      a->k = static_cast<int>(v);
      if (static_cast<double>(a->k) != v) throw ShapeError("kernel option k must be an integer");
    } else if (auto* f = std::get_if<FixedKernel>(&spec.variant); f && key == "sigma") {
      f->sigma = v;
    } else {
      throw ShapeError(fmt::format("unknown option '{}' for {} kernel", key, kind));
    }
  }
  spec.validate();
  return spec;
}

std::string KernelSpec::str() const {
  std::string out;
  if (const auto* a = std::get_if<AdaptiveKernel>(&variant)) {
    out = fmt::format("adaptive:beta={},k={}", a->beta, a->k);
  } else {
    out = fmt::format("fixed:sigma={}", std::get<FixedKernel>(variant).sigma);
  }
  if (truncation != 4.0) out += fmt::format(",trunc={}", truncation);
  return out;
}

double DensityMap::count() const { return compensated_sum(values.reshaped()); }

std::optional<std::vector<double>> knn_mean_distance(std::span<const Point> points, int k) {
  if (k < 1) throw ShapeError("knn_mean_distance: k must be >= 1");
  if (points.size() < 2) return std::nullopt;
  const std::size_t n = points.size();
  std::vector<double> result(n);
  std::vector<double> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist.push_back(std::hypot(points[i].x - points[j].x, points[i].y - points[j].y));
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    double acc = 0.0;
    for (std::size_t t = 0; t < take; ++t) acc += dist[t];
    result[i] = acc / static_cast<double>(take);
  }
  return result;
}

void splat_gaussian(DensityMap& map, Point p, double sigma, double truncation) {
  const auto radius = static_cast<Index>(std::ceil(truncation * sigma));
  const auto cx = static_cast<Index>(std::floor(p.x));
  const auto cy = static_cast<Index>(std::floor(p.y));
  const Index x0 = std::max<Index>(0, cx - radius);
  const Index x1 = std::min<Index>(map.width(), cx + radius + 1);
  const Index y0 = std::max<Index>(0, cy - radius);
  const Index y1 = std::min<Index>(map.height(), cy + radius + 1);
  if (x0 >= x1 || y0 >= y1) return;
  Eigen::ArrayXd mx(x1 - x0);
  Eigen::ArrayXd my(y1 - y0);
  cell_masses(p.x, sigma, x0, mx);
  cell_masses(p.y, sigma, y0, my);
  map.values.block(y0, x0, y1 - y0, x1 - x0) += (my.matrix() * mx.matrix().transpose()).array();
}

DensityMap generate_density_map(const PointAnnotation& ann, const KernelSpec& spec,
                                DensityDiagnostics* diagnostics) {
  spec.validate();
  if (ann.width < 0 || ann.height < 0) throw ShapeError("density map: negative image size");
  DensityDiagnostics local;
  DensityDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag = {};

  DensityMap map(ann.height, ann.width);
  const std::size_t n = ann.points.size();
  if (n == 0) return map;

  std::vector<double> sigmas(n);
  if (const auto* a = std::get_if<AdaptiveKernel>(&spec.variant)) {
    auto distances = knn_mean_distance(ann.points, a->k);
    if (!distances) {
      diag.used_fallback = true;
      diag.warnings.push_back(fmt::format("{}: single annotated head, adaptive kernel undefined; "
                                          "using fixed sigma={}",
                                          ann.image_id, kFallbackSigma));
      std::fill(sigmas.begin(), sigmas.end(), kFallbackSigma);
    } else {
      for (std::size_t i = 0; i < n; ++i) sigmas[i] = a->beta * (*distances)[i];
    }
  } else {
    std::fill(sigmas.begin(), sigmas.end(), std::get<FixedKernel>(spec.variant).sigma);
  }

  for (double& s : sigmas) {
    if (s < kMinSigma) {
      s = kMinSigma;
      ++diag.clamped;
    }
  }
  if (diag.clamped > 0) {
    diag.warnings.push_back(fmt::format("{}: {} kernel(s) below {} px clamped", ann.image_id,
                                        diag.clamped, kMinSigma));
  }

  for (std::size_t i = 0; i < n; ++i) splat_gaussian(map, ann.points[i], sigmas[i], spec.truncation);
  diag.sigmas = std::move(sigmas);
  return map;
}

DensityMap downsample_sum(const DensityMap& map, Index factor, bool* padded) {
  if (factor <= 0) throw ShapeError("downsample_sum: factor must be positive");
  const Index h = map.height();
  const Index w = map.width();
  const Index oh = (h + factor - 1) / factor;
  const Index ow = (w + factor - 1) / factor;
  if (padded) *padded = (h % factor != 0) || (w % factor != 0);
  DensityMap out(oh, ow);
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < ow; ++j) {
      const Index bh = std::min(factor, h - i * factor);
      const Index bw = std::min(factor, w - j * factor);
      out.values(i, j) = map.values.block(i * factor, j * factor, bh, bw).sum();
    }
  }
  return out;
}

DensityMap crop(const DensityMap& map, Index top, Index left, Index height, Index width) {
  if (top < 0 || left < 0 || height < 0 || width < 0 || top + height > map.height() ||
      left + width > map.width()) {
    throw ShapeError(fmt::format("crop [{},{})x[{},{}) outside {}x{} map", top, top + height, left,
                                 left + width, map.height(), map.width()));
  }
  return DensityMap(DensityGrid(map.values.block(top, left, height, width)));
}

DensityMap flip_horizontal(const DensityMap& map) {
  return DensityMap(DensityGrid(map.values.rowwise().reverse()));
}

bool is_interior(Point p, double margin, Index width, Index height) {
  return p.x >= margin && p.y >= margin && static_cast<double>(width) - p.x >= margin &&
         static_cast<double>(height) - p.y >= margin;
}

}  // namespace densattn
