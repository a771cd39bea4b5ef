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

#include "densattn/verify.hpp"

#include "densattn/attention.hpp"
#include "densattn/density.hpp"
#include "densattn/eval.hpp"
#include "densattn/grad_check.hpp"
#include "densattn/model.hpp"
#include "densattn/oracles.hpp"
#include "densattn/train.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <cmath>

namespace densattn::verify {

namespace {

oracle::Dims dims_of(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

oracle::Values values_of(const TensorD& t) { return {t.data().data(), t.data().data() + t.size()}; }

double max_abs_diff(const TensorD& t, const oracle::Values& ref) {
  double worst = 0.0;
  for (Index i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.data()(i) - ref[static_cast<std::size_t>(i)]));
  return worst;
}

Shape random_shape(Rng& rng, Index max_n, Index max_c, Index max_hw) {
  auto pick = [&](Index hi) { return std::uniform_int_distribution<Index>(1, hi)(rng); };
  return {pick(max_n), pick(max_c), pick(max_hw), pick(max_hw)};
}

TensorD pfca_under_test(const TensorD& x, double lambda, Mutation m) {
  return detail::pfca_impl(x, lambda, m == Mutation::PfcaDenominator ? 3.0 : 4.0);
}

CheckResult finish(std::string name, double measured, double tol, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.measured = measured;
  r.tolerance = tol;
  r.passed = std::isfinite(measured) && measured <= tol;
  r.detail = std::move(detail);
  return r;
}

using Forward = std::function<TensorD(const TensorD&)>;
using Reference = std::function<oracle::Values(const oracle::Values&, oracle::Dims)>;

Check oracle_check(std::string name, std::function<Forward(const Options&)> impl, Reference ref) {
  return {name, [=](const Options& opt) {
            Rng rng(opt.seed);
            double worst = 0.0;
            const Forward f = impl(opt);
            for (int t = 0; t < opt.oracle_trials; ++t) {
              const Shape s = random_shape(rng, 2, 8, 6);
              const TensorD x = gaussian<double>(s, 1.0, rng);
              worst = std::max(worst, max_abs_diff(f(x), ref(values_of(x), dims_of(s))));
            }
            return finish(name, worst, 1e-12, fmt::format("{} random tensors up to 2x8x6x6", opt.oracle_trials));
          }};
}

/// A gradient case: given a seeded rng, returns the scalar function and the
/// tensors to differentiate with respect to.
using GradCase = std::function<std::pair<std::function<TensorD()>, std::vector<TensorD>>(Rng&)>;

// Step sizes: smooth cases, and cases with ReLU or max kinks.
constexpr double kSmoothStep = 1e-3;
constexpr double kKinkedStep = 1e-5;

Check grad_check_case(std::string name, GradCase make, double step = kSmoothStep) {
  return {name, [=](const Options& opt) {
            double worst = 0.0;
            GradCheckOptions gc;
            gc.eps = step;
            for (int s = 0; s < opt.grad_seeds; ++s) {
              Rng rng(opt.seed + 101 * static_cast<std::uint64_t>(s));
              auto [f, wrt] = make(rng);
              worst = std::max(worst, grad_check(f, wrt, gc).max_relative_error);
            }
            return finish(name, worst, 1e-4,
                          fmt::format("{} seeds, five-point central differences, h={:g}", opt.grad_seeds, step));
          }};
}

/// sum(w * f(x)) for a fixed random projection w.
GradCase projected(std::function<TensorD(const TensorD&)> f, Shape shape) {
  return [=](Rng& rng) {
    TensorD x = gaussian<double>(shape, 1.0, rng);
    TensorD w;
    {
      NoGradGuard guard;
      w = gaussian<double>(f(x).shape(), 1.0, rng);
    }
    return std::pair{std::function<TensorD()>([=] { return sum_all(f(x) * w); }), std::vector<TensorD>{x}};
  };
}

template <typename Params>
GradCase projected_with_params(std::function<TensorD(const TensorD&, const Params&)> f, Shape shape,
                               std::function<Params(Rng&)> make_params,
                               std::function<std::vector<TensorD>(const Params&)> tensors) {
  return [=](Rng& rng) {
    TensorD x = gaussian<double>(shape, 1.0, rng);
    Params p = make_params(rng);
    TensorD w;
    {
      NoGradGuard guard;
      w = gaussian<double>(f(x, p).shape(), 1.0, rng);
    }
    std::vector<TensorD> wrt{x};
    for (const auto& t : tensors(p)) wrt.push_back(t);
    return std::pair{std::function<TensorD()>([=] { return sum_all(f(x, p) * w); }), wrt};
  };
}

GradCase toy_model(AttentionKind kind) {
  return [=](Rng& rng) {
    AttentionConfig a;
    a.kind = kind;
    ModelConfig mc = ModelConfig::csrnet(1.0 / 32.0, a);
    mc.init = InitScheme::He;
    mc.seed = rng();
    auto model = std::make_shared<Model<double>>(Model<double>::build(mc));
    TensorD x = uniform<double>({1, 3, 8, 8}, 0.0, 1.0, rng);
    TensorD gt = uniform<double>({1, 1, 1, 1}, 0.0, 1.0, rng);
    std::vector<TensorD> wrt{x};
    for (auto& [name, p] : model->params()) {
      // Random biases keep units off the ReLU kink.
      if (name.ends_with("bias")) p.mutable_data() = gaussian<double>(p.shape(), 0.1, rng).data();
      wrt.push_back(p);
    }
    return std::pair{std::function<TensorD()>([=] { return euclidean_loss(model->forward(x), gt); }), wrt};
  };
}

std::vector<Check> build_registry() {
  using oracle::Dims;
  using oracle::Values;
  const double lambda = 1e-4;
  std::vector<Check> checks;

  checks.push_back(oracle_check(
      "oracle.pfca", [=](const Options& o) { return Forward([=](const TensorD& x) { return pfca_under_test(x, lambda, o.mutation); }); },
      [=](const Values& x, Dims d) { return oracle::pfca(x, d, lambda); }));
  checks.push_back(oracle_check(
      "oracle.sa_softmax", [](const Options&) { return Forward([](const TensorD& x) { return sa(x, SaActivation::Softmax); }); },
      [](const Values& x, Dims d) { return oracle::sa(x, d, true); }));
  checks.push_back(oracle_check(
      "oracle.sa_sigmoid", [](const Options&) { return Forward([](const TensorD& x) { return sa(x, SaActivation::Sigmoid); }); },
      [](const Values& x, Dims d) { return oracle::sa(x, d, false); }));
  checks.push_back(oracle_check(
      "oracle.simam", [=](const Options&) { return Forward([=](const TensorD& x) { return simam(x, lambda); }); },
      [=](const Values& x, Dims d) { return oracle::simam(x, d, lambda); }));
  for (bool softmax : {true, false}) {
    const auto act = softmax ? SaActivation::Softmax : SaActivation::Sigmoid;
    checks.push_back(oracle_check(
        softmax ? "oracle.pfcasa_softmax" : "oracle.pfcasa_sigmoid",
        [=](const Options& o) { return Forward([=](const TensorD& x) { return sa(pfca_under_test(x, lambda, o.mutation), act); }); },
        [=](const Values& x, Dims d) { return oracle::pfcasa(x, d, softmax, lambda); }));
  }
  checks.push_back({"oracle.conv2d", [](const Options& opt) {
                      Rng rng(opt.seed);
                      double worst = 0.0;
                      for (int t = 0; t < opt.oracle_trials; ++t) {
                        const Shape xs = random_shape(rng, 2, 4, 9);
                        const Index k = std::uniform_int_distribution<Index>(1, 3)(rng);
                        const Index dil = std::uniform_int_distribution<Index>(1, 2)(rng);
                        const Index stride = std::uniform_int_distribution<Index>(1, 2)(rng);
                        const Index pad = dil * (k - 1) / 2;
                        if (xs.h + 2 * pad < dil * (k - 1) + 1 || xs.w + 2 * pad < dil * (k - 1) + 1) continue;
                        const Shape ws{std::uniform_int_distribution<Index>(1, 4)(rng), xs.c, k, k};
                        TensorD x = gaussian<double>(xs, 1.0, rng);
                        TensorD w = gaussian<double>(ws, 1.0, rng);
                        TensorD b = gaussian<double>({1, ws.n, 1, 1}, 1.0, rng);
                        const TensorD y = conv2d(x, w, std::optional{b}, ConvGeometry{stride, pad, dil});
                        const Values bv = values_of(b);
                        const Values ref = oracle::conv2d(values_of(x), dims_of(xs), values_of(w), dims_of(ws), &bv,
                                                          stride, pad, dil, nullptr);
                        worst = std::max(worst, max_abs_diff(y, ref));
                      }
                      return finish("oracle.conv2d", worst, 1e-12, "naive loop, same accumulation order");
                    }});

  const Shape attn_shape{2, 6, 5, 4};
  checks.push_back(grad_check_case("grad.pfca", projected([](const TensorD& x) { return pfca(x); }, attn_shape)));
  checks.push_back(grad_check_case("grad.sa_softmax",
                                   projected([](const TensorD& x) { return sa(x, SaActivation::Softmax); }, attn_shape)));
  checks.push_back(grad_check_case("grad.sa_sigmoid",
                                   projected([](const TensorD& x) { return sa(x, SaActivation::Sigmoid); }, attn_shape)));
  checks.push_back(grad_check_case("grad.simam", projected([](const TensorD& x) { return simam(x); }, attn_shape)));
  checks.push_back(grad_check_case("grad.pfcasa_softmax",
                                   projected([](const TensorD& x) { return pfcasa(x, SaActivation::Softmax); }, attn_shape)));
  checks.push_back(grad_check_case("grad.pfcasa_sigmoid",
                                   projected([](const TensorD& x) { return pfcasa(x, SaActivation::Sigmoid); }, attn_shape)));

  const Shape param_shape{2, 8, 4, 5};
  checks.push_back(grad_check_case(
      "grad.se", projected_with_params<SeParams<double>>(
                     [](const TensorD& x, const SeParams<double>& p) { return se(x, p, 4); }, param_shape,
                     [](Rng& rng) { return SeParams<double>::create(8, 4, rng, 0.5); },
                     [](const SeParams<double>& p) { return std::vector<TensorD>{p.reduce, p.expand}; }),
      kKinkedStep));
  checks.push_back(grad_check_case(
      "grad.cbam", projected_with_params<CbamParams<double>>(
                       [](const TensorD& x, const CbamParams<double>& p) { return cbam(x, p, 4); }, param_shape,
                       [](Rng& rng) { return CbamParams<double>::create(8, 4, rng, 0.5); },
                       [](const CbamParams<double>& p) {
                         return std::vector<TensorD>{p.mlp.reduce, p.mlp.expand, p.spatial};
                       }),
      kKinkedStep));
  checks.push_back(grad_check_case(
      "grad.cam", projected_with_params<CamParams<double>>(
                      [](const TensorD& x, const CamParams<double>& p) { return cam(x, p, 4); }, param_shape,
                      [](Rng& rng) {
                        auto p = CamParams<double>::create(8, 4, rng, 0.5);
                        p.squeeze_bias = gaussian<double>(p.squeeze_bias.shape(), 0.5, rng);
                        p.shift = gaussian<double>(p.shift.shape(), 0.5, rng);
                        return p;
                      },
                      [](const CamParams<double>& p) {
                        return std::vector<TensorD>{p.squeeze_weight, p.squeeze_bias, p.scale, p.shift,
                                                    p.height_weight, p.height_bias, p.width_weight, p.width_bias};
                      }),
      kKinkedStep));

  for (const auto& [label, geom] : std::vector<std::pair<std::string, ConvGeometry>>{
           {"grad.conv2d", ConvGeometry{1, 1, 1}},
           {"grad.conv2d_dilated", ConvGeometry{1, 2, 2}},
           {"grad.conv2d_strided", ConvGeometry{2, 0, 1}}}) {
    checks.push_back(grad_check_case(label, [geom = geom](Rng& rng) {
      TensorD x = gaussian<double>({2, 3, 6, 5}, 1.0, rng);
      TensorD w = gaussian<double>({4, 3, 3, 3}, 1.0, rng);
      TensorD b = gaussian<double>({1, 4, 1, 1}, 1.0, rng);
      TensorD proj;
      {
        NoGradGuard guard;
        proj = gaussian<double>(conv2d(x, w, std::optional{b}, geom).shape(), 1.0, rng);
      }
      return std::pair{std::function<TensorD()>([=] { return sum_all(conv2d(x, w, std::optional{b}, geom) * proj); }),
                       std::vector<TensorD>{x, w, b}};
    }));
  }
  checks.push_back(grad_check_case("grad.max_pool",
                                   projected([](const TensorD& x) { return pool(x, PoolKind::Max, 2, 2); }, {2, 3, 6, 7}),
                                   kKinkedStep));
  checks.push_back(grad_check_case("grad.avg_pool",
                                   projected([](const TensorD& x) { return pool(x, PoolKind::Avg, 2, 2); }, {2, 3, 6, 7})));
  checks.push_back(grad_check_case("grad.euclidean_loss", [](Rng& rng) {
    TensorD pred = gaussian<double>({3, 1, 4, 4}, 1.0, rng);
    TensorD gt = gaussian<double>({3, 1, 4, 4}, 1.0, rng);
    return std::pair{std::function<TensorD()>([=] { return euclidean_loss(pred, gt); }), std::vector<TensorD>{pred}};
  }));
  checks.push_back(grad_check_case("grad.toy_model", toy_model(AttentionKind::None), kKinkedStep));
  checks.push_back(grad_check_case("grad.toy_model_pfcasa", toy_model(AttentionKind::PFCASA), kKinkedStep));

  checks.push_back({"params.parameter_free_zero", [](const Options&) {
                      double worst = 0.0;
                      for (auto kind : {AttentionKind::PFCA, AttentionKind::SA, AttentionKind::SimAM, AttentionKind::PFCASA}) {
                        for (Index c : {1, 3, 16, 64, 512, 1000}) {
                          AttentionConfig a;
                          a.kind = kind;
                          worst = std::max(worst, static_cast<double>(param_count(a, c)));
                        }
                        AttentionConfig a;
                        a.kind = kind;
                        const Index with = Model<double>::build(ModelConfig::csrnet(0.125, a)).count_params();
                        const Index without = Model<double>::build(ModelConfig::csrnet(0.125)).count_params();
                        worst = std::max(worst, static_cast<double>(std::abs(with - without)));
                      }
                      return finish("params.parameter_free_zero", worst, 0.0, "added params at C in {1..1000}");
                    }});
  checks.push_back({"params.cbam_minus_se", [](const Options&) {
                      double worst = 0.0;
                      for (int r : {4, 16}) {
                        AttentionConfig se_cfg;
                        se_cfg.kind = AttentionKind::SE;
                        se_cfg.reduction_ratio = r;
                        AttentionConfig cbam_cfg = se_cfg;
                        cbam_cfg.kind = AttentionKind::CBAM;
                        worst = std::max(worst, std::abs(static_cast<double>(param_count(cbam_cfg, 512) -
                                                                             param_count(se_cfg, 512) - 98)));
                      }
                      return finish("params.cbam_minus_se", worst, 0.0, "CBAM - SE = 98 at r in {4, 16}");
                    }});
  checks.push_back({"params.model_closed_form", [](const Options&) {
                      double worst = 0.0;
                      for (double scale : {1.0, 0.5, 0.125}) {
                        const Index built = Model<double>::build(ModelConfig::csrnet(scale)).count_params();
                        worst = std::max(worst, std::abs(static_cast<double>(built - oracle::csrnet_params(scale))));
                      }
                      return finish("params.model_closed_form", worst, 0.0, "sum of Cin*Cout*k*k + Cout");
                    }});
  checks.push_back({"params.budget", [](const Options&) {
                      double worst = 0.0;
                      for (const char* text : {"se:r=4", "se:r=16", "cam:r=8", "cam:r=16", "cbam:r=4", "cbam:r=16"}) {
                        worst = std::max(worst, budget_audit(16263041, AttentionConfig::parse(text), 512).ratio);
                      }
                      return finish("params.budget", worst, kParameterBudget, "worst added/base at C=512");
                    }});

  checks.push_back({"density.mass", [](const Options& opt) {
                      Rng rng(opt.seed);
                      double worst = 0.0;
                      for (int t = 0; t < 100; ++t) {
                        PointAnnotation ann;
                        ann.width = 256;
                        ann.height = 256;
                        const int n = std::uniform_int_distribution<int>(10, 60)(rng);
                        std::uniform_real_distribution<double> pos(48.0, 208.0);
                        for (int i = 0; i < n; ++i) ann.points.push_back({pos(rng), pos(rng)});
                        for (const auto& spec : {KernelSpec::adaptive(), KernelSpec::fixed()}) {
                          const double count = generate_density_map(ann, spec).count();
                          worst = std::max(worst, std::abs(count - n) / n);
                        }
                      }
                      return finish("density.mass", worst, 0.005, "100 interior annotations, both kernels");
                    }});
  checks.push_back({"density.downsample", [](const Options& opt) {
                      Rng rng(opt.seed);
                      double worst = 0.0;
                      for (int t = 0; t < 20; ++t) {
                        DensityMap map(std::uniform_int_distribution<Index>(8, 70)(rng),
                                       std::uniform_int_distribution<Index>(8, 70)(rng));
                        std::uniform_real_distribution<double> u(0.0, 1.0);
                        for (Index i = 0; i < map.values.size(); ++i) map.values(i) = u(rng);
                        for (Index f : {2, 4, 8}) {
                          worst = std::max(worst, std::abs(downsample_sum(map, f).count() - map.count()));
                        }
                      }
                      return finish("density.downsample", worst, 1e-12, "block sums keep the count");
                    }});
  checks.push_back({"density.kernel_quadrature", [](const Options& opt) {
                      Rng rng(opt.seed);
                      std::uniform_real_distribution<double> pos(20.0, 44.0);
                      double worst = 0.0;
                      for (int t = 0; t < 10; ++t) {
                        const Point p{pos(rng), pos(rng)};
                        const double sigma = 0.7 + 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                        DensityMap map(64, 64);
                        splat_gaussian(map, p, sigma, 4.0);
                        for (Index y = 0; y < 64; y += 3) {
                          for (Index x = 0; x < 64; x += 3) {
                            if (std::abs(x + 0.5 - p.x) > 4.0 * sigma - 1 || std::abs(y + 0.5 - p.y) > 4.0 * sigma - 1) continue;
                            const double ref = oracle::gaussian_mass(p.x, p.y, sigma, x, x + 1.0, y, y + 1.0);
                            worst = std::max(worst, std::abs(map.values(y, x) - ref));
                          }
                        }
                      }
                      return finish("density.kernel_quadrature", worst, 1e-9, "pixel value vs Simpson integral");
                    }});

  checks.push_back({"metrics.hand_triple", [](const Options&) {
                      const std::vector<CountPair> pairs{{10.0, 12.0}, {20.0, 18.0}};
                      const CountMetrics m = metrics(pairs);
                      const double expected_acc = 1.0 - (2.0 / 12.0 + 2.0 / 18.0) / 2.0;
                      const double err = std::max({std::abs(m.mae - 2.0), std::abs(m.mse - 2.0),
                                                   m.accuracy ? std::abs(*m.accuracy - expected_acc) : 1.0});
                      return finish("metrics.hand_triple", err, 1e-12, "preds [10,20] vs gts [12,18]");
                    }});
  checks.push_back({"metrics.bin_recompose", [](const Options& opt) {
                      Rng rng(opt.seed);
                      std::uniform_real_distribution<double> gt(1.0, 700.0);
                      std::normal_distribution<double> noise(0.0, 10.0);
                      std::vector<ImageResult> results;
                      for (int i = 0; i < 200; ++i) {
                        const double g = std::round(gt(rng));
                        results.push_back(ImageResult::make(fmt::format("img{}", i), g + noise(rng), g));
                      }
                      const MetricsReport rep = make_report(results, 20.0, 500.0);
                      double weighted = 0.0;
                      std::size_t n = 0;
                      for (const auto& b : rep.bins) {
                        weighted += b.mean_accuracy * static_cast<double>(b.n_images);
                        n += b.n_images;
                      }
                      const double err = n == 200 && rep.totals.accuracy
                                             ? std::abs(weighted / static_cast<double>(n) - *rep.totals.accuracy)
                                             : 1.0;
                      return finish("metrics.bin_recompose", err, 1e-12, "count-weighted bin means vs overall");
                    }});
  return checks;
}

}  // namespace

Mutation parse_mutation(std::string_view text) {
  if (text.empty() || text == "none") return Mutation::None;
  if (text == "pfca-denominator") return Mutation::PfcaDenominator;
  throw std::invalid_argument(fmt::format("unknown mutation '{}' (known: none, pfca-denominator)", text));
}

const std::vector<Check>& registry() {
  static const std::vector<Check> checks = build_registry();
  return checks;
}

std::vector<CheckResult> run(const Options& opt) {
  std::vector<CheckResult> results;
  for (const auto& check : registry()) {
    if (!opt.filter.empty() && check.name.find(opt.filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check.run(opt);
    } catch (const std::exception& e) {
      r.name = check.name;
      r.passed = false;
      r.measured = std::numeric_limits<double>::quiet_NaN();
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  }
  return results;
}

std::string summary_json(const std::vector<CheckResult>& results) {
  bool all = !results.empty();
  auto list = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    list.push_back({{"name", r.name},
                    {"passed", r.passed},
                    {"measured", std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nullptr},
                    {"tolerance", r.tolerance},
                    {"detail", r.detail},
                    {"seconds", r.seconds}});
  }
  nlohmann::ordered_json out;
  out["passed"] = all;
  out["checks"] = std::move(list);
  return out.dump(2);
}

}  // namespace densattn::verify
