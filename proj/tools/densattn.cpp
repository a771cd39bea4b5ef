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

// densattn: density maps, attention ablations, parameter audits and the
// self-verification suite.
//
// Exit codes: 0 success, 1 check or budget failure, 2 input error.

#include "densattn/experiment.hpp"
#include "densattn/io.hpp"
#include "densattn/verify.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace densattn;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

struct DensityGenArgs {
  std::string ann;
  std::string out;
  std::string kernel = "adaptive:beta=0.3,k=3";
  bool text = false;
};

int density_gen(const DensityGenArgs& args) {
  const KernelSpec spec = KernelSpec::parse(args.kernel);
  spec.validate();
  std::vector<fs::path> files;
  if (fs::is_directory(args.ann)) {
    for (const auto& e : fs::directory_iterator(args.ann)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".json" || ext == ".csv")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(args.ann)) {
    files.push_back(args.ann);
  } else {
    throw InputError("annotation path not found: " + args.ann);
  }
  fs::create_directories(args.out);

  int status = kOk;
  std::size_t maps = 0;
  std::size_t points = 0;
  double mass = 0.0;
  for (const auto& file : files) {
    AnnotationLoad load;
    try {
      load = load_annotation(file);
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << "\n";
      status = kInputError;
      continue;
    }
    if (load.rejected > 0) {
      std::cerr << fmt::format("warning: {}: dropped {} out-of-bounds point(s)\n", file.string(), load.rejected);
    }
    DensityDiagnostics diag;
    const DensityMap map = generate_density_map(load.annotation, spec, &diag);
    for (const auto& w : diag.warnings) std::cerr << "warning: " << file.string() << ": " << w << "\n";
    const fs::path base = fs::path(args.out) / file.stem();
    write_dmap(fs::path(base).replace_extension(".dmap"), map);
    if (args.text) {
      std::ofstream txt(fs::path(base).replace_extension(".txt"));
      if (!txt) throw InputError("cannot write " + base.string() + ".txt");
      write_dmap_text(txt, map);
    }
    ++maps;
    points += load.annotation.points.size();
    mass += map.count();
  }
  std::cout << fmt::format("{} map(s) written to {}; total mass {:.6f} vs {} point(s)\n", maps, args.out, mass,
                           points);
  return status;
}

struct AblateArgs {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

int ablate(const AblateArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.epochs) cfg.train.epochs = *args.epochs;
  cfg.validate();

  const AblationResult result = run_ablation(cfg);
  std::cout << fmt::format("{:<16} {:>10} {:>10} {:>10} {:>12} {:>6}\n", "config", "MAE", "MSE", "accuracy",
                           "params", "added");
  for (const auto& run : result.runs) {
    const auto& t = run.row.report.totals;
    std::cout << fmt::format("{:<16} {:>10.4f} {:>10.4f} {:>10} {:>12} {:>6}\n", run.row.config, t.mae, t.mse,
                             t.accuracy ? fmt::format("{:.4f}", *t.accuracy) : "-", run.row.params,
                             run.row.added_params ? "Yes" : "No");
  }
  std::cout << "comparison: " << result.comparison_csv.string() << "\nbins: " << result.bins_csv.string() << "\n";
  return kOk;
}

struct AuditArgs {
  Index channels = 512;
  Index base = 16263041;
  std::vector<std::string> attention;
};

int audit(const AuditArgs& args) {
  if (args.channels < 1) throw InputError("--channels must be >= 1");
  if (args.base < 1) throw InputError("--base must be >= 1");
  std::vector<std::string> requested = args.attention;
  if (requested.empty()) {
    requested = {"pfca", "sa:act=sigmoid", "sa:act=softmax", "simam", "pfcasa", "se:r=4", "se:r=16",
                 "cam:r=8", "cam:r=16", "cbam:r=4", "cbam:r=16"};
  }
  std::cout << fmt::format("channels {}, base {}, budget {:.2f}%\n", args.channels, args.base,
                           100.0 * kParameterBudget);
  std::cout << fmt::format("{:<16} {:>12} {:>10} {:>8}\n", "config", "added", "ratio", "budget");
  bool over = false;
  bool invalid = false;
  for (const auto& text : requested) {
    try {
      const AttentionConfig cfg = AttentionConfig::parse(text);
      const BudgetReport r = budget_audit(args.base, cfg, args.channels);
      over = over || !r.within_budget;
      std::cout << fmt::format("{:<16} {:>12} {:>9.4f}% {:>8}\n", cfg.label(), r.added_params, 100.0 * r.ratio,
                               r.within_budget ? "ok" : "OVER");
    } catch (const std::exception& e) {
      invalid = true;
      std::cout << fmt::format("{:<16} error: {}\n", text, e.what());
    }
  }
  if (invalid) return kInputError;
  return over ? kFailed : kOk;
}

struct VerifyArgs {
  std::string filter;
  std::string mutate = "none";
  std::string json;
  int trials = 50;
  int seeds = 5;
};

int run_verify(const VerifyArgs& args) {
  verify::Options opt;
  opt.filter = args.filter;
  opt.mutation = verify::parse_mutation(args.mutate);
  opt.oracle_trials = args.trials;
  opt.grad_seeds = args.seeds;
  const auto results = verify::run(opt);
  if (results.empty()) throw InputError("no checks match filter '" + args.filter + "'");
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    std::cout << fmt::format("{} {:<28} measured {:.3e} tol {:.1e} ({:.2f}s) {}\n", r.passed ? "PASS" : "FAIL",
                             r.name, r.measured, r.tolerance, r.seconds, r.detail);
  }
  const std::string summary = verify::summary_json(results);
  if (!args.json.empty()) {
    std::ofstream out(args.json);
    if (!out) throw InputError("cannot write " + args.json);
    out << summary << "\n";
  }
  std::cout << fmt::format("{} of {} checks passed\n",
                           std::count_if(results.begin(), results.end(), [](const auto& r) { return r.passed; }),
                           results.size());
  return all ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"densattn: parameter-free attention for crowd-count density estimation"};
  app.require_subcommand(1);

  DensityGenArgs dg;
  auto* dg_cmd = app.add_subcommand("density-gen", "Render density maps from point annotations");
  dg_cmd->add_option("--ann", dg.ann, "Annotation file or directory (.json, or .csv with a .size sidecar)")->required();
  dg_cmd->add_option("--out", dg.out, "Output directory for .dmap files")->required();
  dg_cmd->add_option("--kernel", dg.kernel, "adaptive:beta=0.3,k=3 | fixed:sigma=15 [,trunc=4]")
      ->capture_default_str();
  dg_cmd->add_flag("--text", dg.text, "Also write a whitespace-separated .txt map");

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Train and compare attention configurations");
  ab_cmd->add_option("--config", ab.config, "Experiment JSON file")->required();
  ab_cmd->add_option("--output-dir", ab.output_dir, "Override output_dir");
  ab_cmd->add_option("--seed", ab.seed, "Override train.seed");
  ab_cmd->add_option("--epochs", ab.epochs, "Override train.epochs");

  AuditArgs au;
  auto* au_cmd = app.add_subcommand("audit", "Report attention parameter overhead against a budget");
  au_cmd->add_option("--channels", au.channels, "Channel width at the attention slot")->capture_default_str();
  au_cmd->add_option("--base", au.base, "Base model parameter count")->capture_default_str();
  au_cmd->add_option("--attn", au.attention, "Attention spec, repeatable (e.g. se:r=4)");

  VerifyArgs ve;
  auto* ve_cmd = app.add_subcommand("verify", "Run the oracle, gradient and invariant checks");
  ve_cmd->add_option("--filter", ve.filter, "Only run checks whose name contains this text");
  ve_cmd->add_option("--mutate", ve.mutate, "Inject a known defect: none | pfca-denominator")->capture_default_str();
  ve_cmd->add_option("--json", ve.json, "Write the machine-readable summary here");
  ve_cmd->add_option("--trials", ve.trials, "Random tensors per oracle check")->capture_default_str();
  ve_cmd->add_option("--seeds", ve.seeds, "Seeds per gradient check")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*dg_cmd) return density_gen(dg);
    if (*ab_cmd) return ablate(ab);
    if (*au_cmd) return audit(au);
    if (*ve_cmd) return run_verify(ve);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
