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

#ifndef DENSATTN_MODEL_HPP
#define DENSATTN_MODEL_HPP

#include "densattn/attention.hpp"

#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace densattn {

struct ConvSpec {
  Index out_channels = 0;
  Index kernel = 3;
  Index dilation = 1;
  bool relu = true;
  // Output head keeps its single channel regardless of width_scale.
  bool scale_width = true;
};

struct PoolSpec {
  Index kernel = 2;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec>;

/// How conv weights are drawn at build time.
enum class InitScheme {
  // Every conv weight ~ N(0, 0.01^2), biases 0.
  Gaussian,
  // Frontend He-normal (standing in for pretrained VGG-16 weights), backend N(0, 0.01^2).
  HeFrontend,
  // Every conv weight He-normal.
  He,
};

std::string_view to_string(InitScheme s);
InitScheme parse_init_scheme(std::string_view text);

/// CSRNet-shaped network description at canonical widths plus a scale.
struct ModelConfig {
  std::vector<LayerSpec> frontend;
  AttentionConfig attention;
  std::vector<LayerSpec> backend;
  double width_scale = 0.125;
  std::uint64_t seed = 1;
  Index in_channels = 3;
  InitScheme init = InitScheme::Gaussian;

  /// VGG-16 first ten convs (three 2x2 max-pools) + six dilation-2 convs + 1x1 head.
  static ModelConfig csrnet(double width_scale = 0.125, AttentionConfig attention = {});

  Index scaled(Index canonical) const;
  Index frontend_channels() const;
  Index output_stride() const;
};

namespace detail {

inline Index scale_channels(Index canonical, double scale) {
  return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(canonical) * scale)));
}

}  // namespace detail

inline ModelConfig ModelConfig::csrnet(double width_scale, AttentionConfig attention) {
  ModelConfig cfg;
  cfg.width_scale = width_scale;
  cfg.attention = attention;
  for (Index c : {64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512}) {
    if (c == 0) {
      cfg.frontend.emplace_back(PoolSpec{});
    } else {
      cfg.frontend.emplace_back(ConvSpec{c});
    }
  }
  for (Index c : {512, 512, 512, 256, 128, 64}) cfg.backend.emplace_back(ConvSpec{c, 3, 2});
  cfg.backend.emplace_back(ConvSpec{1, 1, 1, false, false});
  return cfg;
}

inline Index ModelConfig::scaled(Index canonical) const {
  return detail::scale_channels(canonical, width_scale);
}

inline Index ModelConfig::frontend_channels() const {
  Index c = in_channels;
  for (const auto& l : frontend) {
    if (const auto* conv = std::get_if<ConvSpec>(&l)) {
      c = conv->scale_width ? scaled(conv->out_channels) : conv->out_channels;
    }
  }
  return c;
}

inline Index ModelConfig::output_stride() const {
  Index stride = 1;
  for (const auto* list : {&frontend, &backend}) {
    for (const auto& l : *list) {
      if (const auto* p = std::get_if<PoolSpec>(&l)) stride *= p->kernel;
    }
  }
  return stride;
}

/// Frontend -> attention slot -> dilated backend -> 1x1 density head.
template <typename Scalar>
class Model {
 public:
  struct Conv {
    Tensor<Scalar> weight;
    Tensor<Scalar> bias;
    ConvGeometry geometry;
    bool relu = true;
  };
  struct Pool {
    Index kernel = 2;
  };
  using Layer = std::variant<Conv, Pool>;

  Model() = default;

  static Model build(const ModelConfig& cfg) {
    if (!(cfg.width_scale > 0.0)) throw ShapeError("model: width_scale must be > 0");
    cfg.attention.validate(cfg.frontend_channels());
    Model m;
    m.cfg_ = cfg;
    Rng rng(cfg.seed);
    Index channels = cfg.in_channels;
    auto add_stage = [&](const std::vector<LayerSpec>& specs, const std::string& stage,
                         std::vector<Layer>& layers, bool he) {
      for (std::size_t i = 0; i < specs.size(); ++i) {
        if (const auto* p = std::get_if<PoolSpec>(&specs[i])) {
          layers.emplace_back(Pool{p->kernel});
          continue;
        }
        const auto& spec = std::get<ConvSpec>(specs[i]);
        const Index out = spec.scale_width ? cfg.scaled(spec.out_channels) : spec.out_channels;
        const Index fan_in = channels * spec.kernel * spec.kernel;
        const double stddev = he ? std::sqrt(2.0 / static_cast<double>(fan_in)) : 0.01;
        const std::string prefix = stage + "." + std::to_string(i) + ".";
        Conv conv;
        conv.weight = m.params_.add(prefix + "weight",
                                    gaussian<Scalar>({out, channels, spec.kernel, spec.kernel}, stddev, rng));
        conv.bias = m.params_.add(prefix + "bias", Tensor<Scalar>({1, out, 1, 1}));
        conv.geometry = ConvGeometry{1, spec.dilation * (spec.kernel - 1) / 2, spec.dilation};
        conv.relu = spec.relu;
        layers.emplace_back(std::move(conv));
        channels = out;
      }
    };
    add_stage(cfg.frontend, "frontend", m.frontend_, cfg.init != InitScheme::Gaussian);
    m.attention_ = Attention<Scalar>(cfg.attention, channels, m.params_, "attention.", rng);
    add_stage(cfg.backend, "backend", m.backend_, cfg.init == InitScheme::He);
    return m;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    const Index stride = cfg_.output_stride();
    const Shape s = x.shape();
    if (s.c != cfg_.in_channels) {
      throw ShapeError("model expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                       std::to_string(s.c));
    }
    if (s.h % stride != 0 || s.w % stride != 0) {
      throw ShapeError("model input " + s.str() + " must have height and width divisible by " +
                       std::to_string(stride) + "; zero-pad the image first");
    }
    Tensor<Scalar> h = run(frontend_, x);
    h = attention_(h);
    return run(backend_, h);
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const { return forward(x); }

  Index count_params() const { return params_.count(); }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const Attention<Scalar>& attention() const { return attention_; }

 private:
  static Tensor<Scalar> run(const std::vector<Layer>& layers, Tensor<Scalar> h) {
    for (const auto& layer : layers) {
      if (const auto* conv = std::get_if<Conv>(&layer)) {
        h = conv2d(h, conv->weight, std::optional{conv->bias}, conv->geometry);
        if (conv->relu) h = relu(h);
      } else {
        const auto k = std::get<Pool>(layer).kernel;
        h = pool(h, PoolKind::Max, k, k);
      }
    }
    return h;
  }

  ModelConfig cfg_;
  ParamStore<Scalar> params_;
  std::vector<Layer> frontend_;
  Attention<Scalar> attention_;
  std::vector<Layer> backend_;
};

}  // namespace densattn

#endif  // DENSATTN_MODEL_HPP
