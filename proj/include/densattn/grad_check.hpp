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

#ifndef DENSATTN_GRAD_CHECK_HPP
#define DENSATTN_GRAD_CHECK_HPP

#include "densattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace densattn {

struct GradCheckOptions {
  double eps = 1e-4;
  // Denominator floor: error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  Index worst_tensor = -1;
  Index worst_element = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/**
 * Compares reverse-mode gradients of a scalar function against central
 * finite differences, element by element, over every tensor in `wrt`.
 * The difference quotient is the symmetric five-point stencil
 * (f(-2h) - 8f(-h) + 8f(h) - f(2h)) / 12h.
 *
 * `f` must rebuild its graph from the current values of `wrt` on every
 * call. The tensors in `wrt` are perturbed in place and restored.
 */
inline GradCheckResult grad_check(const std::function<TensorD()>& f, std::vector<TensorD> wrt,
                                  const GradCheckOptions& opt = {}) {
  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  TensorD loss = f();
  loss.backward();

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    TensorD& t = wrt[ti];
    const TensorD::Array analytic =
        t.has_grad() ? t.grad() : TensorD::Array::Zero(t.size()).eval();
    auto& values = t.mutable_data();
    for (Index i = 0; i < t.size(); ++i) {
      const double saved = values(i);
      auto probe = [&](double delta) {
        values(i) = saved + delta;
        return f().item();
      };
      const double h = opt.eps;
      const double numeric = (probe(-2.0 * h) - 8.0 * probe(-h) + 8.0 * probe(h) - probe(2.0 * h)) / (12.0 * h);
      values(i) = saved;
      const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), opt.floor});
      const double err = std::abs(analytic(i) - numeric) / denom;
      if (err > result.max_relative_error || result.worst_element < 0) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_tensor = static_cast<Index>(ti);
        result.worst_element = i;
        result.analytic = analytic(i);
        result.numeric = numeric;
      }
    }
  }
  return result;
}

/// Single-input form: max relative error of d f(x) / dx.
inline double grad_check(const std::function<TensorD(const TensorD&)>& f, TensorD x,
                         double eps = 1e-4) {
  GradCheckOptions opt;
  opt.eps = eps;
  return grad_check([&] { return f(x); }, {x}, opt).max_relative_error;
}

}  // namespace densattn

#endif  // DENSATTN_GRAD_CHECK_HPP
