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

#include "densattn/attention.hpp"
#include "densattn/grad_check.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace densattn;

namespace {

constexpr double kLambda = 1e-4;

template <typename F, typename R>
double worst_vs_oracle(F impl, R ref, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Shape s{std::uniform_int_distribution<Index>(1, 2)(rng), std::uniform_int_distribution<Index>(1, 8)(rng),
                  std::uniform_int_distribution<Index>(1, 6)(rng), std::uniform_int_distribution<Index>(1, 6)(rng)};
    const TensorD x = gaussian<double>(s, 2.0, rng);
    worst = std::max(worst, testing::max_abs_diff(impl(x), ref(testing::values_of(x), testing::dims_of(s))));
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter-free modules agree with scalar evaluation") {
  using oracle::Dims;
  using oracle::Values;
  CHECK(worst_vs_oracle([](const TensorD& x) { return pfca(x, kLambda); },
                        [](const Values& v, Dims d) { return oracle::pfca(v, d, kLambda); }, 1) < 1e-12);
  CHECK(worst_vs_oracle([](const TensorD& x) { return simam(x, kLambda); },
                        [](const Values& v, Dims d) { return oracle::simam(v, d, kLambda); }, 2) < 1e-12);
  for (bool softmax : {true, false}) {
    const auto act = softmax ? SaActivation::Softmax : SaActivation::Sigmoid;
    CHECK(worst_vs_oracle([&](const TensorD& x) { return sa(x, act); },
                          [&](const Values& v, Dims d) { return oracle::sa(v, d, softmax); }, 3) < 1e-12);
    CHECK(worst_vs_oracle([&](const TensorD& x) { return pfcasa(x, act, kLambda); },
                          [&](const Values& v, Dims d) { return oracle::pfcasa(v, d, softmax, kLambda); }, 4) < 1e-12);
  }
}

TEST_CASE("pfca hand example") {
  // Descriptors u = [1, 3] (constant planes): mu = 2, var = 1.
  TensorD x({1, 2, 2, 2});
  x.mutable_data() << 1, 1, 1, 1, 3, 3, 3, 3;
  const double v = (1.0 + 2.0 * (1.0 + kLambda)) / (4.0 * (1.0 + kLambda));
  const TensorD y = pfca(x, kLambda);
  CHECK(y(0, 0, 0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-v))).epsilon(1e-14));
  CHECK(y(0, 1, 1, 1) == doctest::Approx(3.0 / (1.0 + std::exp(-v))).epsilon(1e-14));
}

TEST_CASE("single-channel pfca and constant-plane simam reduce to sigmoid(1/2)") {
  const double half = 1.0 / (1.0 + std::exp(-0.5));
  const TensorD x = testing::randn({2, 1, 3, 3}, 5);
  const TensorD y = pfca(x, kLambda);
  for (Index i = 0; i < x.size(); ++i) CHECK(y.data()(i) == doctest::Approx(x.data()(i) * half).epsilon(1e-14));
  const TensorD c(Shape{1, 2, 3, 3}, 4.0);
  const TensorD z = simam(c, kLambda);
  for (Index i = 0; i < c.size(); ++i) CHECK(z.data()(i) == doctest::Approx(4.0 * half).epsilon(1e-14));
}

TEST_CASE("softmax SA weights sum to one and average 1/(H*W)") {
  const TensorD x = testing::randn({3, 4, 5, 6}, 7);
  const TensorD p = sa_weights(x, SaActivation::Softmax);
  CHECK(p.shape() == Shape{3, 1, 5, 6});
  for (Index n = 0; n < 3; ++n) {
    double total = 0.0;
    for (Index i = 0; i < 30; ++i) total += p.data()(n * 30 + i);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(p.data().mean() == doctest::Approx(1.0 / 30.0).epsilon(1e-14));
}

TEST_CASE("pfcasa is sa after pfca") {
  const TensorD x = testing::randn({2, 5, 4, 4}, 8);
  const TensorD a = pfcasa(x, SaActivation::Sigmoid, kLambda);
  const TensorD b = sa(pfca(x, kLambda), SaActivation::Sigmoid);
  CHECK((a.data() - b.data()).abs().maxCoeff() == 0.0);
}

TEST_CASE("attention outputs keep the input shape") {
  Rng rng(9);
  const TensorD x = gaussian<double>({2, 16, 5, 3}, 1.0, rng);
  CHECK(pfca(x).shape() == x.shape());
  CHECK(simam(x).shape() == x.shape());
  CHECK(sa(x).shape() == x.shape());
  CHECK(se(x, SeParams<double>::create(16, 4, rng), 4).shape() == x.shape());
  CHECK(cbam(x, CbamParams<double>::create(16, 4, rng), 4).shape() == x.shape());
  CHECK(cam(x, CamParams<double>::create(16, 4, rng), 4).shape() == x.shape());
}

TEST_CASE("parameterized modules reject mismatched channels") {
  Rng rng(10);
  const auto p = SeParams<double>::create(16, 4, rng);
  CHECK_THROWS_AS(se(TensorD(Shape{1, 8, 2, 2}), p, 4), ShapeError);
  CHECK_THROWS_AS(se(TensorD(Shape{1, 16, 2, 2}), p, 8), ShapeError);
}

TEST_CASE("parameter counts") {
  for (auto kind : {AttentionKind::None, AttentionKind::PFCA, AttentionKind::SA, AttentionKind::SimAM,
                    AttentionKind::PFCASA}) {
    AttentionConfig cfg;
    cfg.kind = kind;
    for (Index c : {1, 7, 64, 512, 4096}) CHECK(param_count(cfg, c) == 0);
  }
  // Full-width totals minus the 16,263,489-parameter baseline.
  CHECK(param_count(AttentionConfig::parse("se:r=4"), 512) == 16394561 - 16263489);
  CHECK(param_count(AttentionConfig::parse("se:r=16"), 512) == 16296257 - 16263489);
  CHECK(param_count(AttentionConfig::parse("cam:r=8"), 512) == 16363009 - 16263489);
  CHECK(param_count(AttentionConfig::parse("cam:r=16"), 512) == 16313761 - 16263489);
  CHECK(param_count(AttentionConfig::parse("cbam:r=4"), 512) == 16394659 - 16263489);
  CHECK(param_count(AttentionConfig::parse("cbam:r=16"), 512) == 16296355 - 16263489);
  // Closed form for SE: two bias-free C x C/r maps.
  for (int r : {2, 4, 8, 16, 32}) CHECK(param_count(AttentionConfig::parse("se:r=" + std::to_string(r)), 512) == 2 * 512 * 512 / r);
}

TEST_CASE("registered parameters match param_count") {
  for (const char* text : {"se:r=4", "cbam:r=16", "cam:r=8", "cam:r=16", "pfca"}) {
    const AttentionConfig cfg = AttentionConfig::parse(text);
    ParamStore<double> store;
    Rng rng(1);
    Attention<double> attn(cfg, 64, store, "attention.", rng);
    CHECK(store.count() == param_count(cfg, 64));
  }
}

TEST_CASE("budget audit") {
  const BudgetReport se4 = budget_audit(16263041, AttentionConfig::parse("se:r=4"), 512);
  CHECK(se4.added_params == 131072);
  CHECK(se4.within_budget);
  CHECK(se4.ratio == doctest::Approx(131072.0 / 16263041.0));
  CHECK_FALSE(budget_audit(16263041, AttentionConfig::parse("se:r=2"), 512).within_budget);
  CHECK(budget_audit(16263041, AttentionConfig::parse("pfcasa"), 512).added_params == 0);
}

TEST_CASE("config parsing, labels and validation") {
  const auto a = AttentionConfig::parse("SA:act=softmax");
  CHECK(a.kind == AttentionKind::SA);
  CHECK(a.sa_activation == SaActivation::Softmax);
  CHECK(a.label() == "SA(softmax)");
  CHECK(a.slug() == "sa_softmax");
  const auto b = AttentionConfig::parse("cam:r=8");
  CHECK(b.reduction_ratio == 8);
  CHECK(b.label() == "CAM(r=8)");
  CHECK(b.slug() == "cam_r8");
  CHECK(AttentionConfig::parse("pfca:lambda=0.01").lambda == doctest::Approx(0.01));
  CHECK_THROWS_AS(AttentionConfig::parse("eca"), ShapeError);
  CHECK_THROWS_AS(AttentionConfig::parse("se:r"), ShapeError);
  CHECK_THROWS_AS(AttentionConfig::parse("sa:act=tanh"), ShapeError);
  CHECK_THROWS_AS(AttentionConfig::parse("se:r=3").validate(512), ShapeError);
  CHECK_THROWS_AS(AttentionConfig::parse("pfca:lambda=0").validate(512), ShapeError);
  CHECK_NOTHROW(AttentionConfig::parse("se:r=3").validate(513));
}

TEST_CASE("gradients of every attention module") {
  Rng rng(12);
  const TensorD w = gaussian<double>({2, 8, 4, 3}, 1.0, rng);
  const TensorD x = gaussian<double>({2, 8, 4, 3}, 1.0, rng);
  auto projected = [&](auto f) { return grad_check([&](const TensorD& t) { return sum_all(f(t) * w); }, x, 1e-3); };
  CHECK(projected([](const TensorD& t) { return pfca(t); }) < 1e-4);
  CHECK(projected([](const TensorD& t) { return simam(t); }) < 1e-4);
  CHECK(projected([](const TensorD& t) { return sa(t, SaActivation::Softmax); }) < 1e-4);
  CHECK(projected([](const TensorD& t) { return pfcasa(t, SaActivation::Sigmoid); }) < 1e-4);

  auto se_p = SeParams<double>::create(8, 2, rng, 0.5);
  GradCheckOptions opt;
  opt.eps = 1e-5;
  CHECK(grad_check([&] { return sum_all(se(x, se_p, 2) * w); }, {x, se_p.reduce, se_p.expand}, opt)
            .max_relative_error < 1e-4);
  auto cam_p = CamParams<double>::create(8, 2, rng, 0.5);
  CHECK(grad_check([&] { return sum_all(cam(x, cam_p, 2) * w); },
                   {x, cam_p.squeeze_weight, cam_p.scale, cam_p.height_weight, cam_p.width_bias}, opt)
            .max_relative_error < 1e-4);
}

TEST_CASE("float path tracks double") {
  const TensorD x = testing::randn({1, 6, 5, 5}, 13);
  const TensorF xf = cast<float>(x);
  CHECK((pfcasa(x).data() - pfcasa(xf).data().cast<double>()).abs().maxCoeff() < 1e-2);
  CHECK((simam(x).data() - simam(xf).data().cast<double>()).abs().maxCoeff() < 1e-2);
}

TEST_CASE("degenerate and constant inputs") {
  const double half = 1.0 / (1.0 + std::exp(-0.5));
  CHECK(half == doctest::Approx(0.622459).epsilon(1e-6));
  // Every channel has the same mean: V = 1/2.
  TensorD same = testing::randn({1, 3, 4, 4}, 30);
  for (Index c = 0; c < 3; ++c) {
    double m = 0.0;
    for (Index i = 0; i < 16; ++i) m += same.data()(c * 16 + i);
    for (Index i = 0; i < 16; ++i) same.mutable_data()(c * 16 + i) -= m / 16.0;
  }
  const TensorD y = pfca(same, kLambda);
  for (Index i = 0; i < same.size(); ++i) CHECK(y.data()(i) == doctest::Approx(same.data()(i) * half).epsilon(1e-9));

  TensorD two(Shape{1, 2, 3, 3}, 0.0);
  for (Index i = 9; i < 18; ++i) two.mutable_data()(i) = 2.0;
  const auto scores = oracle::pfca_channel_scores(std::vector<double>{0.0, 2.0}, kLambda);
  CHECK(scores[0] == doctest::Approx(3.0002 / 4.0004).epsilon(1e-12));
  CHECK(scores[1] == doctest::Approx(3.0002 / 4.0004).epsilon(1e-12));

  const TensorD c(Shape{1, 3, 4, 5}, 2.5);
  const TensorD soft = sa(c, SaActivation::Softmax);
  for (Index i = 0; i < c.size(); ++i) CHECK(soft.data()(i) == doctest::Approx(2.5 / 20.0).epsilon(1e-14));
  const TensorD zero(Shape{1, 3, 4, 5});
  CHECK((sa_weights(zero, SaActivation::Sigmoid).data() == 0.5).all());
  CHECK((sa(zero, SaActivation::Sigmoid).data() == 0.0).all());
  CHECK((pfcasa(zero, SaActivation::Sigmoid).data() == 0.0).all());

  // Constant c > 0: PFCA scales by sigmoid(1/2), then a uniform spatial weight sigmoid(C * half * c).
  const TensorD pc = pfcasa(c, SaActivation::Sigmoid, kLambda);
  const double expect = 2.5 * half / (1.0 + std::exp(-3.0 * half * 2.5));
  for (Index i = 0; i < c.size(); ++i) CHECK(pc.data()(i) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("simam favours neurons far from the channel mean") {
  const TensorD x = testing::randn({1, 1, 1, 9}, 31);
  const TensorD y = simam(x, kLambda);
  std::vector<std::pair<double, double>> dist;
  const double m = x.data().mean();
  for (Index i = 0; i < 9; ++i) dist.emplace_back(std::pow(x.data()(i) - m, 2), y.data()(i) / x.data()(i));
  std::sort(dist.begin(), dist.end());
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i].second >= dist[i - 1].second);
}

TEST_CASE("SE with zero excitation halves the input") {
  Rng rng(32);
  auto p = SeParams<double>::create(8, 2, rng);
  p.expand.mutable_data().setZero();
  const TensorD x = testing::randn({2, 8, 3, 3}, 33);
  const TensorD y = se(x, p, 2);
  for (Index i = 0; i < x.size(); ++i) CHECK(y.data()(i) == doctest::Approx(0.5 * x.data()(i)).epsilon(1e-14));
}

TEST_CASE("budget audit with no attention") {
  const BudgetReport r = budget_audit(16263041, AttentionConfig{}, 512);
  CHECK(r.added_params == 0);
  CHECK(r.ratio == 0.0);
}
