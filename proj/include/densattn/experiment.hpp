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

#ifndef DENSATTN_EXPERIMENT_HPP
#define DENSATTN_EXPERIMENT_HPP

#include "densattn/eval.hpp"
#include "densattn/model.hpp"
#include "densattn/synthetic.hpp"
#include "densattn/train.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace densattn {

struct DatasetDirs {
  std::filesystem::path annotations;
  std::filesystem::path images;
};

/**
 * One ablation: a shared model/train setup and the attention slots to
 * compare. Read from a single JSON document:
 *
 *   {
 *     "output_dir": "out",
 *     "data": {"synthetic": {"images": 5, "height": 32, "width": 32,
 *                            "count_bins": [[2, 6], [7, 12]], "seed": 7}}
 *          or {"annotations": "ann/", "images": "img/"},
 *     "model": {"width_scale": 0.125, "seed": 1, "init": "he"},
 *     "train": {"lr": 1e-3, "momentum": 0.95, "weight_decay": 5e-4,
 *               "epochs": 200, "batch_size": 1, "seed": 0,
 *               "kernel": "adaptive:beta=0.3,k=3", "val_fraction": 0.2,
 *               "augment": true, "restore_best": true},
 *     "attention": ["none", "pfca", "se:r=16", {"kind": "cam", "r": 8}],
 *     "eval": {"bin_width": 20, "max_bin": 500},
 *     "log_wall_time": false
 *   }
 *
 * Unknown keys are rejected. Relative paths resolve against the config
 * file's directory.
 */
struct ExperimentConfig {
  std::filesystem::path output_dir = "ablation_out";
  std::variant<SyntheticSpec, DatasetDirs> data = SyntheticSpec{};
  ModelConfig model = ModelConfig::csrnet();
  TrainConfig train;
  std::vector<AttentionConfig> attention{AttentionConfig{}};
  double bin_width = 20.0;
  double max_bin = 500.0;
  bool log_wall_time = false;

  static ExperimentConfig from_json(const std::string& text, const std::filesystem::path& base_dir = ".");
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Checks every attention slot, the model and training setup, and that
  /// referenced directories exist. Throws on the first problem.
  void validate() const;
};

/// Loads the dataset the config describes. Real images are zero-padded on
/// the bottom/right so height and width divide the model's output stride.
std::vector<Sample<double>> load_dataset(const ExperimentConfig& cfg);

struct AblationRun {
  AttentionConfig attention;
  ComparisonRow row;
  TrainingLog log;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::filesystem::path comparison_csv;
  std::filesystem::path bins_csv;
};

/**
 * Trains and evaluates one model per attention slot and writes
 * log_<slug>.csv, <slug>.wts, metrics_<slug>.json and per_image_<slug>.csv
 * per slot plus comparison.csv and bins.csv. Slots run in parallel up to
 * DENSATTN_THREADS workers; outputs do not depend on the worker count.
 */
AblationResult run_ablation(const ExperimentConfig& cfg);

}  // namespace densattn

#endif  // DENSATTN_EXPERIMENT_HPP
