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

#include "densattn/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace densattn::oracle {

namespace {

long at(Dims d, long n, long c, long h, long w) { return ((n * d.c + c) * d.h + h) * d.w + w; }

double simpson(double a, double b, double sigma, double centre) {
  const long steps = 2000;  // even
  const double h = (b - a) / static_cast<double>(steps);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  auto f = [&](double t) { return norm * std::exp(-0.5 * (t - centre) * (t - centre) / (sigma * sigma)); };
  double acc = f(a) + f(b);
  for (long i = 1; i < steps; ++i) acc += f(a + static_cast<double>(i) * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Values conv2d(const Values& x, Dims xd, const Values& weight, Dims wd, const Values* bias, long stride,
              long padding, long dilation, Dims* out_dims) {
  const long oh = (xd.h + 2 * padding - dilation * (wd.h - 1) - 1) / stride + 1;
  const long ow = (xd.w + 2 * padding - dilation * (wd.w - 1) - 1) / stride + 1;
  Dims od{xd.n, wd.n, oh, ow};
  Values out(static_cast<std::size_t>(od.size()));
  for (long n = 0; n < xd.n; ++n) {
    for (long co = 0; co < wd.n; ++co) {
      for (long oy = 0; oy < oh; ++oy) {
        for (long ox = 0; ox < ow; ++ox) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(co)] : 0.0;
          for (long ci = 0; ci < xd.c; ++ci) {
            for (long ky = 0; ky < wd.h; ++ky) {
              for (long kx = 0; kx < wd.w; ++kx) {
                const long iy = oy * stride - padding + ky * dilation;
                const long ix = ox * stride - padding + kx * dilation;
                if (iy < 0 || iy >= xd.h || ix < 0 || ix >= xd.w) continue;
                acc += weight[static_cast<std::size_t>(at(wd, co, ci, ky, kx))] *
                       x[static_cast<std::size_t>(at(xd, n, ci, iy, ix))];
              }
            }
          }
          out[static_cast<std::size_t>(at(od, n, co, oy, ox))] = acc;
        }
      }
    }
  }
  if (out_dims) *out_dims = od;
  return out;
}

std::vector<double> pfca_channel_scores(const std::vector<double>& u, double lambda, double denom) {
  const auto c = static_cast<double>(u.size());
  double mu = 0.0;
  for (double v : u) mu += v;
  mu /= c;
  double var = 0.0;
  for (double v : u) var += (v - mu) * (v - mu);
  var /= c;
  std::vector<double> scores;
  for (double v : u) scores.push_back(((v - mu) * (v - mu) + 2.0 * (var + lambda)) / (denom * (var + lambda)));
  return scores;
}

Values pfca(const Values& x, Dims d, double lambda) {
  Values out(x.size());
  for (long n = 0; n < d.n; ++n) {
    std::vector<double> u(static_cast<std::size_t>(d.c));
    for (long c = 0; c < d.c; ++c) {
      double s = 0.0;
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) s += x[static_cast<std::size_t>(at(d, n, c, h, w))];
      }
      u[static_cast<std::size_t>(c)] = s / static_cast<double>(d.h * d.w);
    }
    const auto v = pfca_channel_scores(u, lambda);
    for (long c = 0; c < d.c; ++c) {
      const double g = sigmoid(v[static_cast<std::size_t>(c)]);
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) {
          const auto i = static_cast<std::size_t>(at(d, n, c, h, w));
          out[i] = x[i] * g;
        }
      }
    }
  }
  return out;
}

Values sa_weights(const Values& x, Dims d, bool softmax) {
  Values p(static_cast<std::size_t>(d.n * d.h * d.w));
  for (long n = 0; n < d.n; ++n) {
    std::vector<double> s(static_cast<std::size_t>(d.h * d.w), 0.0);
    for (long h = 0; h < d.h; ++h) {
      for (long w = 0; w < d.w; ++w) {
        double acc = 0.0;
        for (long c = 0; c < d.c; ++c) acc += x[static_cast<std::size_t>(at(d, n, c, h, w))];
        s[static_cast<std::size_t>(h * d.w + w)] = acc;
      }
    }
    if (softmax) {
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (double v : s) z += std::exp(v - m);
      for (std::size_t i = 0; i < s.size(); ++i) p[static_cast<std::size_t>(n) * s.size() + i] = std::exp(s[i] - m) / z;
    } else {
      for (std::size_t i = 0; i < s.size(); ++i) p[static_cast<std::size_t>(n) * s.size() + i] = sigmoid(s[i]);
    }
  }
  return p;
}

Values sa(const Values& x, Dims d, bool softmax) {
  const Values p = sa_weights(x, d, softmax);
  Values out(x.size());
  for (long n = 0; n < d.n; ++n) {
    for (long c = 0; c < d.c; ++c) {
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) {
          const auto i = static_cast<std::size_t>(at(d, n, c, h, w));
          out[i] = x[i] * p[static_cast<std::size_t>((n * d.h + h) * d.w + w)];
        }
      }
    }
  }
  return out;
}

Values simam_energy(const Values& x, Dims d, double lambda) {
  Values e(x.size());
  const auto m = static_cast<double>(d.h * d.w);
  for (long n = 0; n < d.n; ++n) {
    for (long c = 0; c < d.c; ++c) {
      double mu = 0.0;
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) mu += x[static_cast<std::size_t>(at(d, n, c, h, w))];
      }
      mu /= m;
      double var = 0.0;
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) {
          const double t = x[static_cast<std::size_t>(at(d, n, c, h, w))];
          var += (t - mu) * (t - mu);
        }
      }
      var /= m;
      for (long h = 0; h < d.h; ++h) {
        for (long w = 0; w < d.w; ++w) {
          const auto i = static_cast<std::size_t>(at(d, n, c, h, w));
          const double t = x[i];
          e[i] = 4.0 * (var + lambda) / ((t - mu) * (t - mu) + 2.0 * var + 2.0 * lambda);
        }
      }
    }
  }
  return e;
}

Values simam(const Values& x, Dims d, double lambda) {
  const Values e = simam_energy(x, d, lambda);
  Values out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid(1.0 / e[i]);
  return out;
}

Values pfcasa(const Values& x, Dims d, bool softmax, double lambda) {
  return sa(pfca(x, d, lambda), d, softmax);
}

std::vector<double> knn_mean_distance(const std::vector<std::pair<double, double>>& points, int k) {
  std::vector<double> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const double dx = points[i].first - points[j].first;
      const double dy = points[i].second - points[j].second;
      d.push_back(std::sqrt(dx * dx + dy * dy));
    }
    std::sort(d.begin(), d.end());
    const std::size_t take = std::min(d.size(), static_cast<std::size_t>(k));
    double acc = 0.0;
    for (std::size_t t = 0; t < take; ++t) acc += d[t];
    out.push_back(take ? acc / static_cast<double>(take) : 0.0);
  }
  return out;
}

double gaussian_mass(double cx, double cy, double sigma, double x0, double x1, double y0, double y1) {
  return simpson(x0, x1, sigma, cx) * simpson(y0, y1, sigma, cy);
}

long conv_chain_params(long in_channels, const std::vector<std::pair<long, long>>& convs) {
  long total = 0;
  long c = in_channels;
  for (const auto& [out, k] : convs) {
    total += c * out * k * k + out;
    c = out;
  }
  return total;
}

long csrnet_params(double width_scale) {
  auto s = [&](long c) { return std::max(1L, std::lround(static_cast<double>(c) * width_scale)); };
  std::vector<std::pair<long, long>> convs;
  for (long c : {64, 64, 128, 128, 256, 256, 256, 512, 512, 512}) convs.emplace_back(s(c), 3);
  for (long c : {512, 512, 512, 256, 128, 64}) convs.emplace_back(s(c), 3);
  convs.emplace_back(1, 1);
  return conv_chain_params(3, convs);
}

}  // namespace densattn::oracle
