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

// Reference evaluations used only to check the library. Everything here is
// written as plain scalar loops over std::vector and shares no code with
// the tensor/attention/density implementations it checks.

#ifndef DENSATTN_ORACLES_HPP
#define DENSATTN_ORACLES_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace densattn::oracle {

struct Dims {
  long n = 0;
  long c = 0;
  long h = 0;
  long w = 0;
  long size() const { return n * c * h * w; }
};

using Values = std::vector<double>;

/// Naive cross-correlation: acc = bias, then taps in (ci, ky, kx) order,
/// out-of-range taps skipped.
Values conv2d(const Values& x, Dims xd, const Values& weight, Dims wd, const Values* bias, long stride,
              long padding, long dilation, Dims* out_dims);

/// Channel weights V_j for one sample's channel descriptors u.
std::vector<double> pfca_channel_scores(const std::vector<double>& u, double lambda, double denom = 4.0);

Values pfca(const Values& x, Dims d, double lambda);
Values sa_weights(const Values& x, Dims d, bool softmax);
Values sa(const Values& x, Dims d, bool softmax);
/// Minimal energy e_t* for every neuron (moments over each channel's H*W).
Values simam_energy(const Values& x, Dims d, double lambda);
Values simam(const Values& x, Dims d, double lambda);
Values pfcasa(const Values& x, Dims d, bool softmax, double lambda);

double sigmoid(double v);

/// Brute-force mean distance to the k nearest other points.
std::vector<double> knn_mean_distance(const std::vector<std::pair<double, double>>& points, int k);

/// Integral of the unit-mass 2-D Gaussian at (cx, cy) over
/// [x0, x1] x [y0, y1] by composite Simpson quadrature.
double gaussian_mass(double cx, double cy, double sigma, double x0, double x1, double y0, double y1);

/// Sum of Cin*Cout*k*k + Cout over a chain of convs given (Cout, k) pairs.
long conv_chain_params(long in_channels, const std::vector<std::pair<long, long>>& convs);

/// Canonical CSRNet: VGG-16 first ten convs + six dilated convs + 1x1 head.
long csrnet_params(double width_scale);

}  // namespace densattn::oracle

#endif  // DENSATTN_ORACLES_HPP
