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

#ifndef DENSATTN_EVAL_HPP
#define DENSATTN_EVAL_HPP

#include "densattn/density.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace densattn {

double count_from_density(const DensityMap& map);

struct CountPair {
  double predicted = 0.0;
  double ground_truth = 0.0;
};

/**
 * Counting metrics over a set of images.
 *
 * `mse` follows the crowd-counting convention: it is the ROOT of the mean
 * squared count error. `accuracy` is 1 - mean(|C - C_gt| / C_gt) over
 * images with C_gt > 0; images with C_gt == 0 are skipped and counted.
 */
struct CountMetrics {
  double mae = 0.0;
  double mse = 0.0;
  std::optional<double> accuracy;
  std::size_t accuracy_skipped = 0;
};

CountMetrics metrics(std::span<const CountPair> pairs);

struct ImageResult {
  std::string id;
  double predicted = 0.0;
  double ground_truth = 0.0;
  double abs_error = 0.0;
  std::optional<double> relative_error;  // absent when ground_truth == 0

  static ImageResult make(std::string id, double predicted, double ground_truth);
};

struct AccuracyBin {
  double lo = 0.0;
  double hi = 0.0;  // exclusive; +inf for the overflow bin
  std::size_t n_images = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population
};

/// Groups images by ground-truth count into [0, w), [w, 2w), ... up to
/// max_bin plus a trailing [max_bin, inf) bin; empty bins have n = 0.
/// Images without a defined accuracy (C_gt == 0) are left out.
std::vector<AccuracyBin> binned_accuracy(std::span<const ImageResult> per_image, double bin_width = 20.0,
                                         double max_bin = 500.0);

struct MetricsReport {
  std::vector<ImageResult> per_image;
  CountMetrics totals;
  std::vector<AccuracyBin> bins;
};

MetricsReport make_report(std::vector<ImageResult> per_image, double bin_width = 20.0,
                          double max_bin = 500.0);

/// One row of the attention comparison table.
struct ComparisonRow {
  std::string config;
  MetricsReport report;
  Index params = 0;
  bool added_params = false;
};

/// config,mae,mse,accuracy,params,added_params
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);
/// config,bin_lo,bin_hi,n_images,mean_accuracy,std_accuracy
void write_bins_csv(std::ostream& out, std::span<const ComparisonRow> rows);
/// id,predicted,ground_truth,abs_error,relative_error
void write_per_image_csv(std::ostream& out, const MetricsReport& report);
std::string to_json(const MetricsReport& report);

/// Fixed-precision rendering used by every CSV writer.
std::string format_number(double v);

}  // namespace densattn

#endif  // DENSATTN_EVAL_HPP
