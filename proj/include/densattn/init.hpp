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

#ifndef DENSATTN_INIT_HPP
#define DENSATTN_INIT_HPP

#include "densattn/tensor.hpp"

#include <random>

namespace densattn {

using Rng = std::mt19937_64;

template <typename Scalar>
Tensor<Scalar> gaussian(const Shape& shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  typename Tensor<Scalar>::Array a(shape.size());
  for (Index i = 0; i < a.size(); ++i) a(i) = static_cast<Scalar>(dist(rng));
  return Tensor<Scalar>(shape, std::move(a));
}

template <typename Scalar>
Tensor<Scalar> uniform(const Shape& shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  typename Tensor<Scalar>::Array a(shape.size());
  for (Index i = 0; i < a.size(); ++i) a(i) = static_cast<Scalar>(dist(rng));
  return Tensor<Scalar>(shape, std::move(a));
}

/// Same values, different scalar type; graph is not carried over.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  return Tensor<To>(t.shape(), t.data().template cast<To>().eval());
}

}  // namespace densattn

#endif  // DENSATTN_INIT_HPP
