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

#ifndef DENSATTN_ATTENTION_HPP
#define DENSATTN_ATTENTION_HPP

#include "densattn/init.hpp"
#include "densattn/ops.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace densattn {

enum class AttentionKind { None, PFCA, SA, PFCASA, SimAM, SE, CBAM, CAM };
enum class SaActivation { Softmax, Sigmoid };

/// Which attention mechanism sits in the model's attention slot.
struct AttentionConfig {
  AttentionKind kind = AttentionKind::None;
  double lambda = 1e-4;     // PFCA, SimAM, PFCASA
  int reduction_ratio = 16;  // SE, CBAM, CAM
  SaActivation sa_activation = SaActivation::Sigmoid;

  bool parameter_free() const;
  bool uses_sa() const { return kind == AttentionKind::SA || kind == AttentionKind::PFCASA; }

  /// Throws ShapeError when the config cannot be placed at `channels`.
  void validate(Index channels) const;

  /// Table-style label, e.g. "PFCA", "SE(r=4)", "SA(softmax)".
  std::string label() const;
  /// File-name-safe identifier, e.g. "pfca", "se_r4", "sa_softmax".
  std::string slug() const;

  /// Parses "kind[:key=value,...]" with keys lambda, r, act.
  static AttentionConfig parse(std::string_view text);

  bool operator==(const AttentionConfig&) const = default;
};

std::string_view to_string(AttentionKind kind);

/// Exact parameter count of the attention module at `channels`.
Index param_count(const AttentionConfig& cfg, Index channels);

struct BudgetReport {
  Index base_params = 0;
  Index added_params = 0;
  double ratio = 0.0;
  bool within_budget = true;
};

inline constexpr double kParameterBudget = 0.01;

BudgetReport budget_audit(Index base_params, const AttentionConfig& cfg, Index channels);

// ---------------------------------------------------------------------------
// Parameter-free mechanisms.
// ---------------------------------------------------------------------------

namespace detail {

/// ((u - mu)^2 + 2(var + lambda)) / (denom * (var + lambda)) with moments taken
/// over `axes`. denom is 4; other values are for mutation testing.
template <typename Scalar>
Tensor<Scalar> inverse_energy(const Tensor<Scalar>& u, const Axes& axes, Scalar lambda,
                              Scalar denom = Scalar(4)) {
  Tensor<Scalar> centered = u - mean(u, axes);
  Tensor<Scalar> d2 = square(centered);
  Tensor<Scalar> shifted_var = affine(mean(d2, axes), Scalar(1), lambda);
  return (d2 + affine(shifted_var, Scalar(2), Scalar(0))) / affine(shifted_var, denom, Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> pfca_impl(const Tensor<Scalar>& x, Scalar lambda, Scalar denom) {
  Tensor<Scalar> v = inverse_energy(global_avg_pool(x), kChannelAxis, lambda, denom);
  return x * sigmoid(v);
}

}  // namespace detail

/// Parameter-free channel attention: channel descriptors from global average
/// pooling, scored by their distance from the cross-channel mean.
template <typename Scalar>
Tensor<Scalar> pfca(const Tensor<Scalar>& x, Scalar lambda = Scalar(1e-4)) {
  return detail::pfca_impl(x, lambda, Scalar(4));
}

/// Spatial weights p(i, j) from the channel-summed map: softmax over all H*W
/// positions of each sample, or an independent sigmoid per position.
template <typename Scalar>
Tensor<Scalar> sa_weights(const Tensor<Scalar>& x, SaActivation act) {
  Tensor<Scalar> s = channel_sum(x);
  return act == SaActivation::Softmax ? spatial_softmax(s) : sigmoid(s);
}

/// Parameter-free spatial attention.
template <typename Scalar>
Tensor<Scalar> sa(const Tensor<Scalar>& x, SaActivation act = SaActivation::Sigmoid) {
  return x * sa_weights(x, act);
}

/// SimAM: per-neuron weight sigmoid(1 / e*) with e* the minimal energy
/// against the other neurons of the same channel (moments over H*W).
template <typename Scalar>
Tensor<Scalar> simam(const Tensor<Scalar>& x, Scalar lambda = Scalar(1e-4)) {
  if (x.shape().plane() < 1) throw ShapeError("simam needs H*W >= 1");
  return x * sigmoid(detail::inverse_energy(x, kSpatialAxes, lambda));
}

/// PFCA followed by SA on the channel-refined map; identical to sa(pfca(x)).
template <typename Scalar>
Tensor<Scalar> pfcasa(const Tensor<Scalar>& x, SaActivation act = SaActivation::Sigmoid,
                      Scalar lambda = Scalar(1e-4)) {
  return sa(pfca(x, lambda), act);
}

// ---------------------------------------------------------------------------
// Parameterized baselines.
// ---------------------------------------------------------------------------

inline constexpr Index kCbamSpatialKernel = 7;
inline constexpr Index kCamMinBottleneck = 8;

inline Index cam_bottleneck(Index channels, int r) {
  return std::max<Index>(kCamMinBottleneck, channels / r);
}

/// Squeeze-and-excitation: two bias-free 1x1 convs C -> C/r -> C.
template <typename Scalar>
struct SeParams {
  Index channels = 0;
  int reduction_ratio = 0;
  Tensor<Scalar> reduce;  // [C/r, C, 1, 1]
  Tensor<Scalar> expand;  // [C, C/r, 1, 1]

  static SeParams create(Index channels, int r, Rng& rng, double stddev = 0.01) {
    const Index hidden = channels / r;
    return {channels, r, gaussian<Scalar>({hidden, channels, 1, 1}, stddev, rng),
            gaussian<Scalar>({channels, hidden, 1, 1}, stddev, rng)};
  }
  void register_in(ParamStore<Scalar>& store, const std::string& prefix) {
    reduce = store.add(prefix + "reduce.weight", reduce);
    expand = store.add(prefix + "expand.weight", expand);
  }
};

/// CBAM: SE-style shared MLP over avg- and max-pooled descriptors, then a
/// bias-free 7x7 conv over the [channel-mean, channel-max] map.
template <typename Scalar>
struct CbamParams {
  SeParams<Scalar> mlp;
  Tensor<Scalar> spatial;  // [1, 2, 7, 7]

  static CbamParams create(Index channels, int r, Rng& rng, double stddev = 0.01) {
    auto mlp = SeParams<Scalar>::create(channels, r, rng, stddev);
    return {mlp, gaussian<Scalar>({1, 2, kCbamSpatialKernel, kCbamSpatialKernel}, stddev, rng)};
  }
  void register_in(ParamStore<Scalar>& store, const std::string& prefix) {
    mlp.register_in(store, prefix + "mlp.");
    spatial = store.add(prefix + "spatial.weight", spatial);
  }
};

/// Coordinate attention: H- and W-directional pooling, a shared 1x1
/// bottleneck with per-channel scale/shift, then separate 1x1 expansions.
template <typename Scalar>
struct CamParams {
  Index channels = 0;
  int reduction_ratio = 0;
  Tensor<Scalar> squeeze_weight;  // [mip, C, 1, 1]
  Tensor<Scalar> squeeze_bias;    // [1, mip, 1, 1]
  Tensor<Scalar> scale;           // [1, mip, 1, 1]
  Tensor<Scalar> shift;           // [1, mip, 1, 1]
  Tensor<Scalar> height_weight;   // [C, mip, 1, 1]
  Tensor<Scalar> height_bias;     // [1, C, 1, 1]
  Tensor<Scalar> width_weight;    // [C, mip, 1, 1]
  Tensor<Scalar> width_bias;      // [1, C, 1, 1]

  static CamParams create(Index channels, int r, Rng& rng, double stddev = 0.01) {
    const Index mip = cam_bottleneck(channels, r);
    CamParams p;
    p.channels = channels;
    p.reduction_ratio = r;
    p.squeeze_weight = gaussian<Scalar>({mip, channels, 1, 1}, stddev, rng);
    p.squeeze_bias = Tensor<Scalar>({1, mip, 1, 1});
    p.scale = Tensor<Scalar>({1, mip, 1, 1}, Scalar(1));
    p.shift = Tensor<Scalar>({1, mip, 1, 1});
    p.height_weight = gaussian<Scalar>({channels, mip, 1, 1}, stddev, rng);
    p.height_bias = Tensor<Scalar>({1, channels, 1, 1});
    p.width_weight = gaussian<Scalar>({channels, mip, 1, 1}, stddev, rng);
    p.width_bias = Tensor<Scalar>({1, channels, 1, 1});
    return p;
  }
  void register_in(ParamStore<Scalar>& store, const std::string& prefix) {
    squeeze_weight = store.add(prefix + "squeeze.weight", squeeze_weight);
    squeeze_bias = store.add(prefix + "squeeze.bias", squeeze_bias);
    scale = store.add(prefix + "affine.scale", scale);
    shift = store.add(prefix + "affine.shift", shift);
    height_weight = store.add(prefix + "height.weight", height_weight);
    height_bias = store.add(prefix + "height.bias", height_bias);
    width_weight = store.add(prefix + "width.weight", width_weight);
    width_bias = store.add(prefix + "width.bias", width_bias);
  }
};

namespace detail {

inline void check_params(const char* name, Index built_channels, int built_r, Index channels, int r) {
  if (built_channels != channels || built_r != r) {
    throw ShapeError(std::string(name) + " params were built for C=" + std::to_string(built_channels) +
                     ", r=" + std::to_string(built_r) + " but are applied with C=" +
                     std::to_string(channels) + ", r=" + std::to_string(r));
  }
}

template <typename Scalar>
Tensor<Scalar> conv1x1(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                       const std::optional<Tensor<Scalar>>& b = std::nullopt) {
  return conv2d(x, w, b, ConvGeometry{});
}

template <typename Scalar>
Tensor<Scalar> bottleneck(const Tensor<Scalar>& z, const SeParams<Scalar>& p) {
  return conv1x1(relu(conv1x1(z, p.reduce)), p.expand);
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> se(const Tensor<Scalar>& x, const SeParams<Scalar>& p, int r) {
  detail::check_params("SE", p.channels, p.reduction_ratio, x.shape().c, r);
  return x * sigmoid(detail::bottleneck(global_avg_pool(x), p));
}

template <typename Scalar>
Tensor<Scalar> cbam(const Tensor<Scalar>& x, const CbamParams<Scalar>& p, int r) {
  detail::check_params("CBAM", p.mlp.channels, p.mlp.reduction_ratio, x.shape().c, r);
  Tensor<Scalar> channel_weights = sigmoid(detail::bottleneck(global_avg_pool(x), p.mlp) +
                                           detail::bottleneck(max(x, kSpatialAxes), p.mlp));
  Tensor<Scalar> refined = x * channel_weights;
  Tensor<Scalar> descriptor = concat_channels(mean(refined, kChannelAxis), max(refined, kChannelAxis));
  Tensor<Scalar> spatial_weights = sigmoid(
      conv2d(descriptor, p.spatial, std::optional<Tensor<Scalar>>{}, ConvGeometry{1, kCbamSpatialKernel / 2, 1}));
  return refined * spatial_weights;
}

template <typename Scalar>
Tensor<Scalar> cam(const Tensor<Scalar>& x, const CamParams<Scalar>& p, int r) {
  detail::check_params("CAM", p.channels, p.reduction_ratio, x.shape().c, r);
  auto squeeze = [&p](const Tensor<Scalar>& z) {
    return relu(detail::conv1x1(z, p.squeeze_weight, std::optional{p.squeeze_bias}) * p.scale +
                p.shift);
  };
  // [N,C,H,1] and [N,C,1,W]; a 1x1 conv on each is the shared bottleneck.
  Tensor<Scalar> along_h = mean(x, Axes{false, false, false, true});
  Tensor<Scalar> along_w = mean(x, Axes{false, false, true, false});
  Tensor<Scalar> weight_h =
      sigmoid(detail::conv1x1(squeeze(along_h), p.height_weight, std::optional{p.height_bias}));
  Tensor<Scalar> weight_w =
      sigmoid(detail::conv1x1(squeeze(along_w), p.width_weight, std::optional{p.width_bias}));
  return x * weight_h * weight_w;
}

/**
 * An attention slot instance. Parameter-free kinds hold nothing and
 * register nothing; parameterized kinds register their tensors in the
 * owning ParamStore under `prefix`.
 */
template <typename Scalar>
class Attention {
 public:
  Attention() = default;

  Attention(const AttentionConfig& cfg, Index channels, ParamStore<Scalar>& store,
            const std::string& prefix, Rng& rng, double stddev = 0.01)
      : cfg_(cfg), channels_(channels) {
    cfg.validate(channels);
    const int r = cfg.reduction_ratio;
    switch (cfg.kind) {
      case AttentionKind::SE: {
        auto p = SeParams<Scalar>::create(channels, r, rng, stddev);
        p.register_in(store, prefix);
        params_ = p;
        break;
      }
      case AttentionKind::CBAM: {
        auto p = CbamParams<Scalar>::create(channels, r, rng, stddev);
        p.register_in(store, prefix);
        params_ = p;
        break;
      }
      case AttentionKind::CAM: {
        auto p = CamParams<Scalar>::create(channels, r, rng, stddev);
        p.register_in(store, prefix);
        params_ = p;
        break;
      }
      default:
        break;
    }
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    const auto lambda = static_cast<Scalar>(cfg_.lambda);
    const int r = cfg_.reduction_ratio;
    switch (cfg_.kind) {
      case AttentionKind::None:
        return x;
      case AttentionKind::PFCA:
        return pfca(x, lambda);
      case AttentionKind::SA:
        return sa(x, cfg_.sa_activation);
      case AttentionKind::PFCASA:
        return pfcasa(x, cfg_.sa_activation, lambda);
      case AttentionKind::SimAM:
        return simam(x, lambda);
      case AttentionKind::SE:
        return se(x, std::get<SeParams<Scalar>>(params_), r);
      case AttentionKind::CBAM:
        return cbam(x, std::get<CbamParams<Scalar>>(params_), r);
      case AttentionKind::CAM:
        return cam(x, std::get<CamParams<Scalar>>(params_), r);
    }
    return x;
  }

  const AttentionConfig& config() const { return cfg_; }
  Index channels() const { return channels_; }

 private:
  AttentionConfig cfg_;
  Index channels_ = 0;
  std::variant<std::monostate, SeParams<Scalar>, CbamParams<Scalar>, CamParams<Scalar>> params_;
};

}  // namespace densattn

#endif  // DENSATTN_ATTENTION_HPP
