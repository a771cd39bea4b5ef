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

#ifndef DENSATTN_OPS_HPP
#define DENSATTN_OPS_HPP

#include "densattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>

namespace densattn {

/// Axis mask over (N, C, H, W).
using Axes = std::array<bool, 4>;

inline constexpr Axes kSpatialAxes{false, false, true, true};
inline constexpr Axes kChannelAxis{false, true, false, false};
inline constexpr Axes kAllAxes{true, true, true, true};

namespace detail {

inline const char* axis_name(int k) {
  static constexpr const char* names[] = {"batch (N)", "channel (C)", "height (H)", "width (W)"};
  return names[k];
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  auto da = a.dims();
  auto db = b.dims();
  std::array<Index, 4> out{};
  for (int k = 0; k < 4; ++k) {
    if (da[k] == db[k] || db[k] == 1) {
      out[k] = da[k];
    } else if (da[k] == 1) {
      out[k] = db[k];
    } else {
      throw ShapeError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str() +
                       " along " + axis_name(k));
    }
  }
  return Shape::from_dims(out);
}

/// Strides into `in` for each axis of `out`, zero along broadcast axes.
inline std::array<Index, 4> broadcast_strides(const Shape& in, const Shape& out) {
  auto d = in.dims();
  auto o = out.dims();
  std::array<Index, 4> s{};
  Index stride = 1;
  for (int k = 3; k >= 0; --k) {
    s[k] = (d[k] == 1 && o[k] != 1) ? 0 : stride;
    stride *= d[k];
  }
  return s;
}

/// Visits every element of `out` in row-major order with the matching
/// offsets into two broadcast operands.
template <typename F>
void for_each_broadcast(const Shape& out, const std::array<Index, 4>& sa,
                        const std::array<Index, 4>& sb, F&& f) {
  Index oi = 0;
  for (Index n = 0; n < out.n; ++n) {
    for (Index c = 0; c < out.c; ++c) {
      for (Index h = 0; h < out.h; ++h) {
        Index ai = n * sa[0] + c * sa[1] + h * sa[2];
        Index bi = n * sb[0] + c * sb[1] + h * sb[2];
        for (Index w = 0; w < out.w; ++w, ++oi) f(oi, ai + w * sa[3], bi + w * sb[3]);
      }
    }
  }
}

template <typename Scalar>
using ArrayOf = typename Tensor<Scalar>::Array;

template <typename Scalar>
inline Scalar stable_sigmoid(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic with broadcasting over singleton dims.
// ---------------------------------------------------------------------------

template <typename Scalar, typename Fwd, typename DA, typename DB>
Tensor<Scalar> binary_op(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* name,
                         Fwd fwd, DA da, DB db) {
  using Array = detail::ArrayOf<Scalar>;
  const Shape out = detail::broadcast_shape(a.shape(), b.shape(), name);
  const auto sa = detail::broadcast_strides(a.shape(), out);
  const auto sb = detail::broadcast_strides(b.shape(), out);
  Array value(out.size());
  const Array& av = a.data();
  const Array& bv = b.data();
  detail::for_each_broadcast(out, sa, sb,
                             [&](Index o, Index i, Index j) { value(o) = fwd(av(i), bv(j)); });
  return detail::make_result<Scalar>(
      out, std::move(value), {a, b}, [out, sa, sb, da, db](detail::Node<Scalar>& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        const Array& g = self.grad;
        if (na.requires_grad) {
          Array ga = Array::Zero(na.shape.size());
          detail::for_each_broadcast(out, sa, sb, [&](Index o, Index i, Index j) {
            ga(i) += g(o) * da(na.value(i), nb.value(j));
          });
          na.accumulate(ga);
        }
        if (nb.requires_grad) {
          Array gb = Array::Zero(nb.shape.size());
          detail::for_each_broadcast(out, sa, sb, [&](Index o, Index i, Index j) {
            gb(j) += g(o) * db(na.value(i), nb.value(j));
          });
          nb.accumulate(gb);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return binary_op(
      a, b, "add", [](Scalar x, Scalar y) { return x + y; }, [](Scalar, Scalar) { return Scalar(1); },
      [](Scalar, Scalar) { return Scalar(1); });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return binary_op(
      a, b, "sub", [](Scalar x, Scalar y) { return x - y; }, [](Scalar, Scalar) { return Scalar(1); },
      [](Scalar, Scalar) { return Scalar(-1); });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return binary_op(
      a, b, "mul", [](Scalar x, Scalar y) { return x * y; }, [](Scalar, Scalar y) { return y; },
      [](Scalar x, Scalar) { return x; });
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return binary_op(
      a, b, "div", [](Scalar x, Scalar y) { return x / y; },
      [](Scalar, Scalar y) { return Scalar(1) / y; }, [](Scalar x, Scalar y) { return -x / (y * y); });
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mul(a, b); }
template <typename Scalar>
Tensor<Scalar> operator/(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return div(a, b); }

/// y = a*x + b for scalars a, b.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, Scalar scale, Scalar shift) {
  using Array = detail::ArrayOf<Scalar>;
  Array value = x.data() * scale + shift;
  return detail::make_result<Scalar>(x.shape(), std::move(value), {x},
                                     [scale](detail::Node<Scalar>& self) {
                                       self.inputs[0]->accumulate(self.grad * scale);
                                     });
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x) {
  using Array = detail::ArrayOf<Scalar>;
  Array value = x.data().square();
  return detail::make_result<Scalar>(x.shape(), std::move(value), {x},
                                     [](detail::Node<Scalar>& self) {
                                       auto& in = *self.inputs[0];
                                       in.accumulate(self.grad * Scalar(2) * in.value);
                                     });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  using Array = detail::ArrayOf<Scalar>;
  Array value = x.data().max(Scalar(0));
  return detail::make_result<Scalar>(
      x.shape(), std::move(value), {x}, [](detail::Node<Scalar>& self) {
        auto& in = *self.inputs[0];
        in.accumulate((in.value > Scalar(0)).select(self.grad, Scalar(0)));
      });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  using Array = detail::ArrayOf<Scalar>;
  Array value = x.data().unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); });
  Array saved = value;
  return detail::make_result<Scalar>(x.shape(), std::move(value), {x},
                                     [saved](detail::Node<Scalar>& self) {
                                       self.inputs[0]->accumulate(self.grad * saved *
                                                                  (Scalar(1) - saved));
                                     });
}

enum class Pointwise { Relu, Sigmoid };

template <typename Scalar>
Tensor<Scalar> pointwise(const Tensor<Scalar>& x, Pointwise f) {
  return f == Pointwise::Relu ? relu(x) : sigmoid(x);
}

// ---------------------------------------------------------------------------
// Reductions (keep-dim).
// ---------------------------------------------------------------------------

inline Shape reduced_shape(const Shape& in, const Axes& axes) {
  auto d = in.dims();
  for (int k = 0; k < 4; ++k) {
    if (axes[k]) d[k] = 1;
  }
  return Shape::from_dims(d);
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x, const Axes& axes) {
  using Array = detail::ArrayOf<Scalar>;
  if (x.empty()) throw ShapeError("sum over empty tensor");
  const Shape in = x.shape();
  const Shape out = reduced_shape(in, axes);
  const auto so = detail::broadcast_strides(out, in);
  Array value = Array::Zero(out.size());
  const Array& xv = x.data();
  detail::for_each_broadcast(in, so, so, [&](Index i, Index o, Index) { value(o) += xv(i); });
  return detail::make_result<Scalar>(out, std::move(value), {x},
                                     [in, so](detail::Node<Scalar>& self) {
                                       Array g(in.size());
                                       detail::for_each_broadcast(
                                           in, so, so,
                                           [&](Index i, Index o, Index) { g(i) = self.grad(o); });
                                       self.inputs[0]->accumulate(g);
                                     });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x, const Axes& axes) {
  const Index count = x.size() / reduced_shape(x.shape(), axes).size();
  return affine(sum(x, axes), Scalar(1) / static_cast<Scalar>(count), Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> max(const Tensor<Scalar>& x, const Axes& axes) {
  using Array = detail::ArrayOf<Scalar>;
  if (x.empty()) throw ShapeError("max over empty tensor");
  const Shape in = x.shape();
  const Shape out = reduced_shape(in, axes);
  const auto so = detail::broadcast_strides(out, in);
  Array value = Array::Constant(out.size(), -std::numeric_limits<Scalar>::infinity());
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()), 0);
  const Array& xv = x.data();
  detail::for_each_broadcast(in, so, so, [&](Index i, Index o, Index) {
    if (xv(i) > value(o)) {
      value(o) = xv(i);
      argmax[static_cast<std::size_t>(o)] = i;
    }
  });
  return detail::make_result<Scalar>(out, std::move(value), {x},
                                     [in, argmax](detail::Node<Scalar>& self) {
                                       Array g = Array::Zero(in.size());
                                       for (std::size_t o = 0; o < argmax.size(); ++o) {
                                         g(argmax[o]) += self.grad(static_cast<Index>(o));
                                       }
                                       self.inputs[0]->accumulate(g);
                                     });
}

template <typename Scalar>
Tensor<Scalar> sum_all(const Tensor<Scalar>& x) { return sum(x, kAllAxes); }

/// [N,C,H,W] -> [N,C,1,1]
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) { return mean(x, kSpatialAxes); }

/// [N,C,H,W] -> [N,1,H,W]
template <typename Scalar>
Tensor<Scalar> channel_sum(const Tensor<Scalar>& x) { return sum(x, kChannelAxis); }

/// Population mean and variance of a plain vector.
template <typename Scalar>
std::pair<Scalar, Scalar> mean_var(std::span<const Scalar> v) {
  if (v.empty()) throw ShapeError("mean_var of an empty vector");
  Scalar m = 0;
  for (Scalar e : v) m += e;
  m /= static_cast<Scalar>(v.size());
  Scalar var = 0;
  for (Scalar e : v) var += (e - m) * (e - m);
  return {m, var / static_cast<Scalar>(v.size())};
}

/// Softmax over the H*W positions of each (n, c) plane, max-shifted.
template <typename Scalar>
Tensor<Scalar> spatial_softmax(const Tensor<Scalar>& x) {
  using Array = detail::ArrayOf<Scalar>;
  const Shape s = x.shape();
  const Index plane = s.plane();
  if (plane == 0) throw ShapeError("spatial_softmax over empty plane");
  Array value(s.size());
  const Array& xv = x.data();
  for (Index p = 0; p < s.n * s.c; ++p) {
    auto in = xv.segment(p * plane, plane);
    auto out = value.segment(p * plane, plane);
    out = (in - in.maxCoeff()).exp();
    out /= out.sum();
  }
  Array saved = value;
  return detail::make_result<Scalar>(s, std::move(value), {x},
                                     [s, plane, saved](detail::Node<Scalar>& self) {
                                       Array g(s.size());
                                       for (Index p = 0; p < s.n * s.c; ++p) {
                                         auto pr = saved.segment(p * plane, plane);
                                         auto go = self.grad.segment(p * plane, plane);
                                         const Scalar dot = (go * pr).sum();
                                         g.segment(p * plane, plane) = pr * (go - dot);
                                       }
                                       self.inputs[0]->accumulate(g);
                                     });
}

/// Concatenates along the channel axis; all other extents must agree.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Array = detail::ArrayOf<Scalar>;
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  const Shape out{sa.n, sa.c + sb.c, sa.h, sa.w};
  const Index la = sa.c * sa.plane();
  const Index lb = sb.c * sb.plane();
  Array value(out.size());
  for (Index n = 0; n < sa.n; ++n) {
    value.segment(n * (la + lb), la) = a.data().segment(n * la, la);
    value.segment(n * (la + lb) + la, lb) = b.data().segment(n * lb, lb);
  }
  return detail::make_result<Scalar>(out, std::move(value), {a, b},
                                     [sa, la, lb](detail::Node<Scalar>& self) {
                                       auto& na = *self.inputs[0];
                                       auto& nb = *self.inputs[1];
                                       Array ga(sa.n * la);
                                       Array gb(sa.n * lb);
                                       for (Index n = 0; n < sa.n; ++n) {
                                         ga.segment(n * la, la) = self.grad.segment(n * (la + lb), la);
                                         gb.segment(n * lb, lb) =
                                             self.grad.segment(n * (la + lb) + la, lb);
                                       }
                                       if (na.requires_grad) na.accumulate(ga);
                                       if (nb.requires_grad) nb.accumulate(gb);
                                     });
}

// ---------------------------------------------------------------------------
// Convolution and pooling.
// ---------------------------------------------------------------------------

struct ConvGeometry {
  Index stride = 1;
  Index padding = 0;
  Index dilation = 1;
};

inline Index conv_output_extent(Index in, Index k, const ConvGeometry& g) {
  return (in + 2 * g.padding - g.dilation * (k - 1) - 1) / g.stride + 1;
}

namespace detail {

/// Valid output range [lo, hi) along one axis for tap offset `tap`.
inline std::pair<Index, Index> tap_range(Index in, Index out, Index tap, const ConvGeometry& g) {
  // Need 0 <= o*stride - padding + tap < in.
  Index base = tap - g.padding;
  Index lo = base >= 0 ? 0 : (-base + g.stride - 1) / g.stride;
  Index hi_excl = in - base;  // o*stride < in - base
  Index hi = hi_excl <= 0 ? 0 : (hi_excl + g.stride - 1) / g.stride;
  return {std::min(lo, out), std::min(hi, out)};
}

}  // namespace detail

/**
 * 2-D cross-correlation.
 *
 * x: [N,Cin,H,W], weight: [Cout,Cin,Kh,Kw], bias: Cout elements (any shape).
 * Every output element accumulates bias first, then taps in (ci, ky, kx)
 * order, skipping padded taps, so results are bit-identical to a naive
 * nested-loop evaluation with the same order.
 */
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const std::optional<Tensor<Scalar>>& bias, const ConvGeometry& geom) {
  using Array = detail::ArrayOf<Scalar>;
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (geom.stride < 1 || geom.dilation < 1 || geom.padding < 0) {
    throw ShapeError("conv2d: need stride >= 1, dilation >= 1, padding >= 0");
  }
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input channels (C) " + std::to_string(xs.c) +
                     " do not match weight input channels " + std::to_string(ws.c));
  }
  if (bias && bias->size() != ws.n) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias->size()) +
                     " elements, expected output channels " + std::to_string(ws.n));
  }
  const Index oh = conv_output_extent(xs.h, ws.h, geom);
  const Index ow = conv_output_extent(xs.w, ws.w, geom);
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d: kernel " + ws.str() + " does not fit input " + xs.str() +
                     (oh <= 0 ? " along height (H)" : " along width (W)"));
  }
  const Shape out{xs.n, ws.n, oh, ow};

  Array value(out.size());
  const Array& xv = x.data();
  const Array& wv = weight.data();
  const Index s = geom.stride;
  const Index d = geom.dilation;
  const Index p = geom.padding;

  for (Index n = 0; n < xs.n; ++n) {
    for (Index co = 0; co < ws.n; ++co) {
      Scalar* o = value.data() + ((n * ws.n + co) * oh) * ow;
      std::fill(o, o + oh * ow, bias ? bias->data()(co) : Scalar(0));
      for (Index ci = 0; ci < xs.c; ++ci) {
        const Scalar* in = xv.data() + ((n * xs.c + ci) * xs.h) * xs.w;
        for (Index ky = 0; ky < ws.h; ++ky) {
          auto [y0, y1] = detail::tap_range(xs.h, oh, ky * d, geom);
          for (Index kx = 0; kx < ws.w; ++kx) {
            auto [x0, x1] = detail::tap_range(xs.w, ow, kx * d, geom);
            const Scalar wk = wv(((co * ws.c + ci) * ws.h + ky) * ws.w + kx);
            for (Index oy = y0; oy < y1; ++oy) {
              const Index row = (oy * s - p + ky * d) * xs.w + (kx * d - p);
              Scalar* orow = o + oy * ow;
              for (Index ox = x0; ox < x1; ++ox) orow[ox] += wk * in[row + ox * s];
            }
          }
        }
      }
    }
  }

  std::vector<Tensor<Scalar>> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return detail::make_result<Scalar>(
      out, std::move(value), std::move(inputs),
      [xs, ws, oh, ow, geom, s, d, p](detail::Node<Scalar>& self) {
        auto& nx = *self.inputs[0];
        auto& nw = *self.inputs[1];
        const Array& g = self.grad;
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
          Array gb = Array::Zero(ws.n);
          for (Index n = 0; n < xs.n; ++n) {
            for (Index co = 0; co < ws.n; ++co) {
              gb(co) += g.segment((n * ws.n + co) * oh * ow, oh * ow).sum();
            }
          }
          self.inputs[2]->accumulate(gb);
        }
        Array gx;
        Array gw;
        if (nx.requires_grad) gx = Array::Zero(xs.size());
        if (nw.requires_grad) gw = Array::Zero(ws.size());
        for (Index n = 0; n < xs.n; ++n) {
          for (Index co = 0; co < ws.n; ++co) {
            const Scalar* go = g.data() + ((n * ws.n + co) * oh) * ow;
            for (Index ci = 0; ci < xs.c; ++ci) {
              const Index in_off = ((n * xs.c + ci) * xs.h) * xs.w;
              for (Index ky = 0; ky < ws.h; ++ky) {
                auto [y0, y1] = detail::tap_range(xs.h, oh, ky * d, geom);
                for (Index kx = 0; kx < ws.w; ++kx) {
                  auto [x0, x1] = detail::tap_range(xs.w, ow, kx * d, geom);
                  const Index widx = ((co * ws.c + ci) * ws.h + ky) * ws.w + kx;
                  const Scalar wk = nw.value(widx);
                  Scalar acc = 0;
                  for (Index oy = y0; oy < y1; ++oy) {
                    const Index row = in_off + (oy * s - p + ky * d) * xs.w + (kx * d - p);
                    const Scalar* grow = go + oy * ow;
                    if (nw.requires_grad) {
                      const Scalar* xv = nx.value.data();
                      for (Index ox = x0; ox < x1; ++ox) acc += grow[ox] * xv[row + ox * s];
                    }
                    if (nx.requires_grad) {
                      Scalar* gxv = gx.data();
                      for (Index ox = x0; ox < x1; ++ox) gxv[row + ox * s] += wk * grow[ox];
                    }
                  }
                  if (nw.requires_grad) gw(widx) += acc;
                }
              }
            }
          }
        }
        if (nx.requires_grad) nx.accumulate(gx);
        if (nw.requires_grad) nw.accumulate(gw);
      });
}

enum class PoolKind { Max, Avg };

/// Windowed reduction without padding; output extent floor((H-k)/stride)+1.
template <typename Scalar>
Tensor<Scalar> pool(const Tensor<Scalar>& x, PoolKind kind, Index k, Index stride) {
  using Array = detail::ArrayOf<Scalar>;
  const Shape xs = x.shape();
  if (k < 1 || stride < 1) throw ShapeError("pool: window and stride must be >= 1");
  if (k > xs.h || k > xs.w) {
    throw ShapeError("pool: window " + std::to_string(k) + " exceeds input " + xs.str() +
                     (k > xs.h ? " along height (H)" : " along width (W)"));
  }
  const Index oh = (xs.h - k) / stride + 1;
  const Index ow = (xs.w - k) / stride + 1;
  const Shape out{xs.n, xs.c, oh, ow};
  Array value(out.size());
  std::vector<Index> argmax;
  if (kind == PoolKind::Max) argmax.resize(static_cast<std::size_t>(out.size()));
  const Array& xv = x.data();
  const Scalar inv_area = Scalar(1) / static_cast<Scalar>(k * k);

  Index oi = 0;
  for (Index plane = 0; plane < xs.n * xs.c; ++plane) {
    const Index base = plane * xs.plane();
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox, ++oi) {
        if (kind == PoolKind::Max) {
          Index best = base + (oy * stride) * xs.w + ox * stride;
          for (Index ky = 0; ky < k; ++ky) {
            for (Index kx = 0; kx < k; ++kx) {
              Index idx = base + (oy * stride + ky) * xs.w + ox * stride + kx;
              if (xv(idx) > xv(best)) best = idx;
            }
          }
          value(oi) = xv(best);
          argmax[static_cast<std::size_t>(oi)] = best;
        } else {
          Scalar acc = 0;
          for (Index ky = 0; ky < k; ++ky) {
            for (Index kx = 0; kx < k; ++kx) acc += xv(base + (oy * stride + ky) * xs.w + ox * stride + kx);
          }
          value(oi) = acc * inv_area;
        }
      }
    }
  }

  return detail::make_result<Scalar>(
      out, std::move(value), {x},
      [xs, oh, ow, k, stride, kind, inv_area, argmax](detail::Node<Scalar>& self) {
        Array g = Array::Zero(xs.size());
        if (kind == PoolKind::Max) {
          for (std::size_t o = 0; o < argmax.size(); ++o) g(argmax[o]) += self.grad(static_cast<Index>(o));
        } else {
          Index oi = 0;
          for (Index plane = 0; plane < xs.n * xs.c; ++plane) {
            const Index base = plane * xs.plane();
            for (Index oy = 0; oy < oh; ++oy) {
              for (Index ox = 0; ox < ow; ++ox, ++oi) {
                const Scalar share = self.grad(oi) * inv_area;
                for (Index ky = 0; ky < k; ++ky) {
                  for (Index kx = 0; kx < k; ++kx) g(base + (oy * stride + ky) * xs.w + ox * stride + kx) += share;
                }
              }
            }
          }
        }
        self.inputs[0]->accumulate(g);
      });
}

template <typename Scalar>
Tensor<Scalar> max_pool2d(const Tensor<Scalar>& x, Index k = 2, Index stride = 2) {
  return pool(x, PoolKind::Max, k, stride);
}

}  // namespace densattn

#endif  // DENSATTN_OPS_HPP
