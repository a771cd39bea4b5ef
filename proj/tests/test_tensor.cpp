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

#include "densattn/grad_check.hpp"
#include "densattn/ops.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace densattn;

TEST_CASE("shape basics and errors") {
  const Shape s{2, 3, 4, 5};
  CHECK(s.size() == 120);
  CHECK(s.plane() == 20);
  CHECK(s.str() == "[2,3,4,5]");
  CHECK_THROWS_AS(TensorD(Shape{1, -1, 2, 2}), ShapeError);
  CHECK_THROWS_AS(TensorD(Shape{1, 1, 2, 2}, TensorD::Array::Zero(3)), ShapeError);
  CHECK_THROWS_AS(TensorD(Shape{1, 1, 2, 2}).item(), ShapeError);
}

TEST_CASE("element access is NCHW row-major") {
  TensorD t = TensorD::from_values({1, 2, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  CHECK(t(0, 0, 1, 2) == 5);
  CHECK(t(0, 1, 0, 0) == 6);
  t.at(0, 1, 1, 1) = -1;
  CHECK(t.data()(10) == -1);
}

TEST_CASE("broadcasting arithmetic") {
  const TensorD a = TensorD::from_values({1, 2, 1, 2}, {1, 2, 3, 4});
  const TensorD b = TensorD::from_values({1, 2, 1, 1}, {10, 20});
  const TensorD c = a * b;
  CHECK(c.shape() == Shape{1, 2, 1, 2});
  CHECK(c(0, 1, 0, 1) == 80);
  CHECK_THROWS_AS(a + TensorD(Shape{1, 3, 1, 1}), ShapeError);
}

TEST_CASE("reductions") {
  const TensorD x = testing::randn({2, 3, 4, 5}, 1);
  const TensorD s = sum(x, kSpatialAxes);
  CHECK(s.shape() == Shape{2, 3, 1, 1});
  double manual = 0.0;
  for (Index h = 0; h < 4; ++h) {
    for (Index w = 0; w < 5; ++w) manual += x(1, 2, h, w);
  }
  CHECK(s(1, 2, 0, 0) == doctest::Approx(manual).epsilon(1e-14));
  CHECK(mean(x, kChannelAxis).shape() == Shape{2, 1, 4, 5});
  CHECK(sum_all(x).item() == doctest::Approx(x.data().sum()).epsilon(1e-14));
  const TensorD m = max(x, kSpatialAxes);
  CHECK(m(0, 0, 0, 0) == x.data().head(20).maxCoeff());
}

TEST_CASE("spatial softmax sums to one per sample and channel") {
  const TensorD x = testing::randn({3, 1, 5, 4}, 2, 10.0);
  const TensorD p = spatial_softmax(x);
  for (Index n = 0; n < 3; ++n) {
    double total = 0.0;
    for (Index i = 0; i < 20; ++i) total += p.data()(n * 20 + i);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("sigmoid is stable for large magnitudes") {
  const TensorD x = TensorD::from_values({1, 1, 1, 3}, {-800.0, 0.0, 800.0});
  const TensorD y = sigmoid(x);
  CHECK(y.data()(0) == 0.0);
  CHECK(y.data()(1) == 0.5);
  CHECK(y.data()(2) == 1.0);
}

TEST_CASE("conv2d matches the naive oracle bit for bit") {
  Rng rng(3);
  for (Index stride : {1, 2}) {
    for (Index dil : {1, 2}) {
      for (Index k : {1, 3}) {
        const Index pad = dil * (k - 1) / 2;
        const TensorD x = gaussian<double>({2, 3, 7, 6}, 1.0, rng);
        const TensorD w = gaussian<double>({4, 3, k, k}, 1.0, rng);
        const TensorD b = gaussian<double>({1, 4, 1, 1}, 1.0, rng);
        const TensorD y = conv2d(x, w, std::optional{b}, ConvGeometry{stride, pad, dil});
        const auto bv = testing::values_of(b);
        oracle::Dims od;
        const auto ref = oracle::conv2d(testing::values_of(x), testing::dims_of(x.shape()), testing::values_of(w),
                                        testing::dims_of(w.shape()), &bv, stride, pad, dil, &od);
        CHECK(y.shape() == Shape{od.n, od.c, od.h, od.w});
        CHECK(testing::max_abs_diff(y, ref) == 0.0);
      }
    }
  }
}

TEST_CASE("conv2d rejects bad geometry") {
  const TensorD x(Shape{1, 2, 4, 4});
  CHECK_THROWS_AS(conv2d(x, TensorD(Shape{1, 3, 3, 3}), std::optional<TensorD>{}, ConvGeometry{1, 1, 1}),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(x, TensorD(Shape{1, 2, 3, 3}), std::optional<TensorD>{}, ConvGeometry{0, 1, 1}),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(x, TensorD(Shape{1, 2, 7, 7}), std::optional<TensorD>{}, ConvGeometry{1, 0, 1}),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(x, TensorD(Shape{2, 2, 3, 3}), std::optional{TensorD(Shape{1, 3, 1, 1})},
                         ConvGeometry{1, 1, 1}),
                  ShapeError);
}

TEST_CASE("max pool picks block maxima and floors odd extents") {
  const TensorD x = TensorD::from_values({1, 1, 3, 4}, {1, 5, 2, 0, 3, 4, 9, 1, 7, 7, 7, 7});
  const TensorD y = max_pool2d(x);
  CHECK(y.shape() == Shape{1, 1, 1, 2});
  CHECK(y(0, 0, 0, 0) == 5);
  CHECK(y(0, 0, 0, 1) == 9);
}

TEST_CASE("backward accumulates through shared inputs") {
  TensorD x = TensorD::from_values({1, 1, 1, 2}, {3.0, -2.0});
  x.set_requires_grad(true);
  const TensorD y = sum_all(x * x + x);
  y.backward();
  REQUIRE(x.has_grad());
  CHECK(x.grad()(0) == doctest::Approx(7.0));
  CHECK(x.grad()(1) == doctest::Approx(-3.0));
}

TEST_CASE("no-grad guard records nothing") {
  TensorD x(Shape{1, 1, 1, 1}, 2.0, true);
  NoGradGuard guard;
  const TensorD y = x * x;
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("backward needs a connected scalar") {
  TensorD x(Shape{1, 1, 1, 2}, 1.0, true);
  CHECK_THROWS_AS((x * x).backward(), ShapeError);
  CHECK_THROWS_AS(TensorD(Shape{1, 1, 1, 1}).backward(), ShapeError);
}

TEST_CASE("finite-difference checks of primitive ops") {
  Rng rng(11);
  TensorD x = gaussian<double>({2, 3, 4, 5}, 1.0, rng);
  const TensorD w = gaussian<double>({2, 3, 4, 5}, 1.0, rng);
  const TensorD wc = gaussian<double>({2, 1, 4, 5}, 1.0, rng);
  const TensorD wr = gaussian<double>({2, 3, 1, 1}, 1.0, rng);
  auto check = [&](const std::function<TensorD(const TensorD&)>& f) { return grad_check(f, x); };
  CHECK(check([&](const TensorD& t) { return sum_all(sigmoid(t) * w); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(relu(t) * w); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(square(t) * w); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all((t / affine(square(t), 1.0, 1.0)) * w); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(mean(t, kSpatialAxes) * wr); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(max(t, kChannelAxis) * wc); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(spatial_softmax(channel_sum(t)) * wc); }) < 1e-4);
  CHECK(check([&](const TensorD& t) { return sum_all(concat_channels(t, t) * concat_channels(w, w)); }) < 1e-4);
}

TEST_CASE("float path agrees with double at single precision") {
  const TensorD x = testing::randn({1, 3, 6, 6}, 5);
  const TensorD w = testing::randn({2, 3, 3, 3}, 6);
  const TensorD yd = relu(conv2d(x, w, std::optional<TensorD>{}, ConvGeometry{1, 1, 1}));
  const TensorF yf = relu(conv2d(cast<float>(x), cast<float>(w), std::optional<TensorF>{}, ConvGeometry{1, 1, 1}));
  CHECK((yd.data() - yf.data().cast<double>()).abs().maxCoeff() < 1e-4);
}

TEST_CASE("hand examples for conv, pooling and pointwise ops") {
  const TensorD ones(Shape{1, 1, 3, 3}, 1.0);
  const TensorD full = conv2d(ones, ones, std::optional<TensorD>{}, ConvGeometry{1, 0, 1});
  CHECK(full.shape() == Shape{1, 1, 1, 1});
  CHECK(full.item() == 9.0);
  const TensorD x = testing::randn({1, 2, 4, 5}, 21);
  const TensorD id = TensorD::from_values({2, 2, 1, 1}, {1, 0, 0, 1});
  CHECK((conv2d(x, id, std::optional<TensorD>{}, ConvGeometry{1, 0, 1}).data() == x.data()).all());

  const TensorD q = TensorD::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(pool(q, PoolKind::Max, 2, 2).item() == 4.0);
  CHECK(pool(q, PoolKind::Avg, 2, 2).item() == 2.5);
  const TensorD c(Shape{1, 2, 4, 4}, 1.75);
  CHECK((pool(c, PoolKind::Max, 2, 2).data() == 1.75).all());
  CHECK((pool(c, PoolKind::Avg, 2, 2).data() == 1.75).all());
  CHECK((global_avg_pool(c).data() == 1.75).all());

  const TensorD r = relu(TensorD::from_values({1, 1, 1, 2}, {-3, 3}));
  CHECK(r.data()(0) == 0.0);
  CHECK(r.data()(1) == 3.0);
  const std::vector<double> v{0.0, 2.0};
  const auto [mu, var] = mean_var<double>(v);
  CHECK(mu == 1.0);
  CHECK(var == 1.0);

  TensorD two(Shape{1, 2, 2, 2}, 1.0);
  for (Index i = 4; i < 8; ++i) two.mutable_data()(i) = 2.0;
  CHECK((channel_sum(two).data() == 3.0).all());

  const TensorD big = testing::randn({2, 4, 3, 3}, 22);
  const TensorD scale = testing::randn({2, 4, 1, 1}, 23);
  const TensorD prod = big * scale;
  for (Index n = 0; n < 2; ++n) {
    for (Index ch = 0; ch < 4; ++ch) CHECK(prod(n, ch, 2, 1) == big(n, ch, 2, 1) * scale(n, ch, 0, 0));
  }
}

TEST_CASE("gradient of a sum of squares") {
  TensorD x = TensorD::from_values({1, 1, 1, 2}, {1, 2});
  x.set_requires_grad(true);
  sum_all(square(x)).backward();
  CHECK(x.grad()(0) == 2.0);
  CHECK(x.grad()(1) == 4.0);
  const TensorD in = testing::randn({1, 2, 5, 5}, 24);
  const TensorD w = testing::randn({3, 2, 3, 3}, 25);
  CHECK(grad_check([&](const TensorD& t) { return sum_all(square(conv2d(t, w, std::optional<TensorD>{}, ConvGeometry{1, 1, 1}))); }, in, 1e-3) < 1e-4);
}

TEST_CASE("identical inputs give bit-identical outputs") {
  const TensorD x = testing::randn({2, 3, 8, 8}, 26);
  const TensorD w = testing::randn({4, 3, 3, 3}, 27);
  const TensorD a = conv2d(x, w, std::optional<TensorD>{}, ConvGeometry{1, 2, 2});
  const TensorD b = conv2d(x, w, std::optional<TensorD>{}, ConvGeometry{1, 2, 2});
  CHECK((a.data() == b.data()).all());
}
