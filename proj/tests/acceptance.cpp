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

// Release acceptance: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "densattn/attention.hpp"
#include "densattn/density.hpp"
#include "densattn/eval.hpp"
#include "densattn/model.hpp"
#include "densattn/oracles.hpp"
#include "densattn/verify.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace densattn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

oracle::Values values_of(const TensorD& t) { return {t.data().data(), t.data().data() + t.size()}; }

double max_abs_diff(const TensorD& t, const oracle::Values& ref) {
  double worst = 0.0;
  for (Index i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.data()(i) - ref[static_cast<std::size_t>(i)]));
  return worst;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  const double lambda = 1e-4;
  using Fwd = std::function<TensorD(const TensorD&)>;
  using Ref = std::function<oracle::Values(const oracle::Values&, oracle::Dims)>;
  const std::vector<std::tuple<std::string, Fwd, Ref>> modules{
      {"PFCA", [&](const TensorD& x) { return pfca(x, lambda); },
       [&](const oracle::Values& v, oracle::Dims d) { return oracle::pfca(v, d, lambda); }},
      {"SA(softmax)", [](const TensorD& x) { return sa(x, SaActivation::Softmax); },
       [](const oracle::Values& v, oracle::Dims d) { return oracle::sa(v, d, true); }},
      {"SA(sigmoid)", [](const TensorD& x) { return sa(x, SaActivation::Sigmoid); },
       [](const oracle::Values& v, oracle::Dims d) { return oracle::sa(v, d, false); }},
      {"SimAM", [&](const TensorD& x) { return simam(x, lambda); },
       [&](const oracle::Values& v, oracle::Dims d) { return oracle::simam(v, d, lambda); }},
      {"PFCASA(softmax)", [&](const TensorD& x) { return pfcasa(x, SaActivation::Softmax, lambda); },
       [&](const oracle::Values& v, oracle::Dims d) { return oracle::pfcasa(v, d, true, lambda); }},
      {"PFCASA(sigmoid)", [&](const TensorD& x) { return pfcasa(x, SaActivation::Sigmoid, lambda); },
       [&](const oracle::Values& v, oracle::Dims d) { return oracle::pfcasa(v, d, false, lambda); }},
  };
  Rng rng(20240601);
  auto pick = [&](Index hi) { return std::uniform_int_distribution<Index>(1, hi)(rng); };
  double worst = 0.0;
  std::string worst_module;
  for (int t = 0; t < 50; ++t) {
    const Shape s{pick(2), pick(8), pick(6), pick(6)};
    const TensorD x = gaussian<double>(s, 1.5, rng);
    for (const auto& [name, f, ref] : modules) {
      const double err = max_abs_diff(f(x), ref(values_of(x), {s.n, s.c, s.h, s.w}));
      if (err >= worst) {
        worst = err;
        worst_module = name;
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs < 10.0,
          fmt::format("worst |diff| {:.2e} ({}) over 50 tensors x 6 modules, {:.2f}s", worst, worst_module, secs)};
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  verify::Options opt;
  opt.filter = "grad.";
  opt.grad_seeds = 5;
  const auto results = verify::run(opt);
  double worst = 0.0;
  std::string worst_name;
  std::vector<std::string> failed;
  for (const auto& r : results) {
    if (!r.passed) failed.push_back(r.name);
    if (r.measured >= worst) {
      worst = r.measured;
      worst_name = r.name;
    }
  }
  const double secs = seconds_since(start);
  std::string detail = fmt::format("{} checks x 5 seeds, worst rel err {:.2e} ({}), {:.1f}s", results.size(), worst,
                                   worst_name, secs);
  for (const auto& f : failed) detail += " FAILED:" + f;
  return {failed.empty() && !results.empty() && secs < 120.0, detail};
}

Outcome zero_parameter_guarantee() {
  Index worst = 0;
  for (auto kind : {AttentionKind::PFCA, AttentionKind::SA, AttentionKind::SimAM, AttentionKind::PFCASA}) {
    for (Index c = 1; c <= 4096; c = c < 16 ? c + 1 : c * 2) {
      AttentionConfig a;
      a.kind = kind;
      worst = std::max(worst, param_count(a, c));
    }
  }
  Index mismatches = 0;
  for (double scale : {0.125, 1.0}) {
    const Index base = Model<float>::build(ModelConfig::csrnet(scale)).count_params();
    for (const char* text : {"pfca", "sa:act=sigmoid", "sa:act=softmax", "simam", "pfcasa"}) {
      const Index with = Model<float>::build(ModelConfig::csrnet(scale, AttentionConfig::parse(text))).count_params();
      mismatches += with != base ? 1 : 0;
    }
  }
  return {worst == 0 && mismatches == 0,
          fmt::format("max added params {} over C in [1, 4096]; {} model-count mismatches at width 1/8 and 1", worst,
                      mismatches)};
}

Outcome budget_audit_check() {
  const Index base = 16263041;
  bool ok = true;
  std::string detail;
  for (const char* text : {"se:r=4", "se:r=16", "cam:r=8", "cam:r=16", "cbam:r=4", "cbam:r=16"}) {
    const BudgetReport r = budget_audit(base, AttentionConfig::parse(text), 512);
    ok = ok && r.within_budget && r.ratio <= 0.01;
    detail += fmt::format("{} {:.3f}%; ", AttentionConfig::parse(text).label(), 100.0 * r.ratio);
  }
  for (int r : {4, 16}) {
    const Index delta = param_count(AttentionConfig::parse(fmt::format("cbam:r={}", r)), 512) -
                        param_count(AttentionConfig::parse(fmt::format("se:r={}", r)), 512);
    ok = ok && delta == 98;
    detail += fmt::format("CBAM-SE(r={}) = {}; ", r, delta);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome density_mass() {
  Rng rng(77);
  std::uniform_real_distribution<double> pos(48.0, 208.0);
  std::uniform_int_distribution<int> count(10, 60);
  double worst = 0.0;
  int annotations = 0;
  int redraws = 0;
  const std::vector<std::pair<std::string, KernelSpec>> kernels{{"adaptive", KernelSpec::adaptive()},
                                                                 {"fixed", KernelSpec::fixed()}};
  while (annotations < 100) {
    PointAnnotation ann;
    ann.image_id = fmt::format("a{}", annotations);
    ann.width = 256;
    ann.height = 256;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) ann.points.push_back({pos(rng), pos(rng)});
    std::vector<double> errors;
    bool interior = true;
    for (const auto& [_, spec] : kernels) {
      DensityDiagnostics diag;
      const DensityMap map = generate_density_map(ann, spec, &diag);
      for (std::size_t i = 0; i < ann.points.size(); ++i) {
        interior = interior && is_interior(ann.points[i], 3.0 * diag.sigmas[i], 256, 256);
      }
      errors.push_back(std::abs(map.count() - n) / n);
    }
    if (!interior) {
      ++redraws;
      continue;
    }
    for (double e : errors) worst = std::max(worst, e);
    ++annotations;
  }

  double down = 0.0;
  std::uniform_real_distribution<double> u(0.0, 0.05);
  for (int t = 0; t < 100; ++t) {
    DensityMap m(64, 48);
    for (Index i = 0; i < m.values.size(); ++i) m.values(i) = u(rng);
    for (Index f : {1, 2, 4, 8}) down = std::max(down, std::abs(downsample_sum(m, f).count() - m.count()));
  }
  return {worst <= 0.005 && down <= 1e-12,
          fmt::format("worst relative mass error {:.3e} over 100 annotations x 2 kernels ({} non-interior draws "
                      "skipped); downsample drift {:.1e}",
                      worst, redraws, down)};
}

Outcome canonical_count() {
  const auto start = Clock::now();
  const Index got = Model<float>::build(ModelConfig::csrnet(1.0)).count_params();
  const Index target = 16263041;
  const double secs = seconds_since(start);
  return {got == target && secs < 30.0,
          fmt::format("built {} params, expected {} (difference {:+d}), {:.2f}s", got, target, got - target, secs)};
}

// ---------------------------------------------------------------------------

struct SmokeRuns {
  bool ok = false;
  std::string error;
  double first_seconds = 0.0;
  fs::path first;
  fs::path second;
};

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DENSATTN_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

SmokeRuns smoke_runs() {
  SmokeRuns s;
  const fs::path root = fs::temp_directory_path() / "densattn_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  s.first = root / "run1";
  s.second = root / "run2";
  const std::string base = std::string("ablate --config ") + DENSATTN_SMOKE_CONFIG + " --output-dir ";
  const auto start = Clock::now();
  int status = run_cli(base + s.first.string(), root / "run1.log");
  s.first_seconds = seconds_since(start);
  if (status == 0) status = run_cli(base + s.second.string(), root / "run2.log");
  s.ok = status == 0;
  if (!s.ok) s.error = fmt::format("ablate exited with {}: {}", status, slurp(root / "run1.log"));
  return s;
}

struct FinalEpoch {
  double loss = 0.0;
  double mae = 0.0;
};

FinalEpoch final_epoch(const fs::path& log) {
  const auto rows = read_csv(log);
  if (rows.size() < 2) throw std::runtime_error("empty training log " + log.string());
  const auto& last = rows.back();
  return {std::stod(last.at(1)), std::stod(last.at(2))};
}

Outcome overfit_smoke(const SmokeRuns& s) {
  if (!s.ok) return {false, s.error};
  bool ok = s.first_seconds < 600.0;
  std::string detail;
  for (const char* text : {"none", "pfca", "simam", "pfcasa", "sa:act=sigmoid"}) {
    const AttentionConfig a = AttentionConfig::parse(text);
    const FinalEpoch e = final_epoch(s.first / fmt::format("log_{}.csv", a.slug()));
    ok = ok && e.mae < 1.0;
    detail += fmt::format("{} {:.4f}; ", a.label(), e.mae);
  }
  return {ok, fmt::format("final-epoch train MAE: {}all 5 configs in {:.0f}s", detail, s.first_seconds)};
}

Outcome softmax_pathology(const SmokeRuns& s) {
  if (!s.ok) return {false, s.error};
  auto log_of = [&](const char* text) { return s.first / ("log_" + AttentionConfig::parse(text).slug() + ".csv"); };
  const FinalEpoch soft = final_epoch(log_of("sa:act=softmax"));
  const FinalEpoch sig = final_epoch(log_of("sa:act=sigmoid"));
  const double ratio = soft.loss / std::max(sig.loss, std::numeric_limits<double>::min());

  Rng rng(5);
  double sum_err = 0.0;
  double mean_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Shape shape{2, 8, std::uniform_int_distribution<Index>(1, 12)(rng), std::uniform_int_distribution<Index>(1, 12)(rng)};
    const TensorD p = sa_weights(gaussian<double>(shape, 3.0, rng), SaActivation::Softmax);
    const Index plane = shape.plane();
    for (Index n = 0; n < shape.n; ++n) {
      const double total = p.data().segment(n * plane, plane).sum();
      sum_err = std::max(sum_err, std::abs(total - 1.0));
      mean_err = std::max(mean_err, std::abs(total / static_cast<double>(plane) - 1.0 / static_cast<double>(plane)));
    }
  }
  return {ratio >= 10.0 && sum_err <= 1e-12 && mean_err <= 1e-12,
          fmt::format("final loss softmax {:.4g} vs sigmoid {:.4g} (ratio {:.3g}); weight sums off by at most {:.1e}",
                      soft.loss, sig.loss, ratio, sum_err)};
}

Outcome metrics_fidelity() {
  bool ok = true;
  const std::vector<CountPair> pairs{{10, 12}, {20, 18}};
  const CountMetrics m = metrics(pairs);
  const double acc = 1.0 - (2.0 / 12.0 + 2.0 / 18.0) / 2.0;
  ok = ok && std::abs(m.mae - 2.0) <= 1e-12 && std::abs(m.mse - 2.0) <= 1e-12 && std::abs(*m.accuracy - acc) <= 1e-12;

  // Bin [0,20): accuracies 0.9, 0.8. Bin [20,40): 1.0, 0.9, 0.8. Overflow: 0.5.
  std::vector<ImageResult> r{ImageResult::make("a", 11, 10),  ImageResult::make("b", 12, 10),
                             ImageResult::make("c", 30, 30),  ImageResult::make("d", 27, 30),
                             ImageResult::make("e", 36, 30),  ImageResult::make("f", 150, 100)};
  const auto bins = binned_accuracy(r, 20.0, 100.0);
  double worst = 0.0;
  auto expect = [&](std::size_t b, double mean, double sd) {
    worst = std::max({worst, std::abs(bins[b].mean_accuracy - mean), std::abs(bins[b].std_accuracy - sd)});
  };
  expect(0, 0.85, 0.05);
  expect(1, 0.9, std::sqrt(0.02 / 3.0));
  expect(5, 0.5, 0.0);
  ok = ok && bins[0].n_images == 2 && bins[1].n_images == 3 && bins[5].n_images == 1 && worst <= 1e-12;

  Rng rng(9);
  std::uniform_real_distribution<double> gt(1.0, 800.0);
  std::normal_distribution<double> noise(0.0, 20.0);
  std::vector<ImageResult> many;
  for (int i = 0; i < 500; ++i) {
    const double g = gt(rng);
    many.push_back(ImageResult::make(std::to_string(i), g + noise(rng), g));
  }
  const MetricsReport report = make_report(many);
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& b : report.bins) {
    weighted += b.mean_accuracy * static_cast<double>(b.n_images);
    n += b.n_images;
  }
  const double recompose = std::abs(weighted / static_cast<double>(n) - *report.totals.accuracy);
  ok = ok && n == many.size() && recompose <= 1e-12;
  return {ok, fmt::format("MAE {:.6f} MSE {:.6f} accuracy {:.6f}; worst bin stat error {:.1e}; recomposition error {:.1e}",
                          m.mae, m.mse, *m.accuracy, worst, recompose)};
}

Outcome determinism(const SmokeRuns& s) {
  if (!s.ok) return {false, s.error};
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(s.first)) {
    if (e.path().extension() != ".csv") continue;
    ++compared;
    if (slurp(e.path()) != slurp(s.second / e.path().filename())) differing.push_back(e.path().filename().string());
  }
  std::string detail = fmt::format("{} CSV files compared byte for byte", compared);
  for (const auto& d : differing) detail += " DIFFERS:" + d;
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  SmokeRuns smoke;
  bool smoke_done = false;
  auto smoke_once = [&]() -> const SmokeRuns& {
    if (!smoke_done) {
      smoke = smoke_runs();
      smoke_done = true;
    }
    return smoke;
  };
  criteria.emplace_back("oracle equivalence", oracle_equivalence);
  criteria.emplace_back("gradient correctness", gradient_correctness);
  criteria.emplace_back("zero-parameter guarantee", zero_parameter_guarantee);
  criteria.emplace_back("budget audit", budget_audit_check);
  criteria.emplace_back("density-map mass", density_mass);
  criteria.emplace_back("canonical parameter count", canonical_count);
  criteria.emplace_back("overfit smoke", [&] { return overfit_smoke(smoke_once()); });
  criteria.emplace_back("softmax-SA pathology", [&] { return softmax_pathology(smoke_once()); });
  criteria.emplace_back("metrics fidelity", metrics_fidelity);
  criteria.emplace_back("determinism", [&] { return determinism(smoke_once()); });

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::cout << fmt::format("{} {:>2}. {}: {}\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
                           criteria.size());
  return failures == 0 ? 0 : 1;
}
