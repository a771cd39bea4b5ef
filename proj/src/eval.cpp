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

#include "densattn/eval.hpp"

#include "densattn/numeric.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <ostream>

namespace densattn {

double count_from_density(const DensityMap& map) { return map.count(); }

CountMetrics metrics(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw ShapeError("metrics: need at least one image");
  CompensatedSum abs_sum;
  CompensatedSum sq_sum;
  CompensatedSum rel_sum;
  std::size_t rel_n = 0;
  CountMetrics m;
  for (const auto& p : pairs) {
    const double err = std::abs(p.predicted - p.ground_truth);
    abs_sum.add(err);
    sq_sum.add(err * err);
    if (p.ground_truth > 0.0) {
      rel_sum.add(err / p.ground_truth);
      ++rel_n;
    } else {
      ++m.accuracy_skipped;
    }
  }
  const auto n = static_cast<double>(pairs.size());
  m.mae = abs_sum.value() / n;
  m.mse = std::sqrt(sq_sum.value() / n);
  if (rel_n > 0) m.accuracy = 1.0 - rel_sum.value() / static_cast<double>(rel_n);
  return m;
}

ImageResult ImageResult::make(std::string id, double predicted, double ground_truth) {
  ImageResult r;
  r.id = std::move(id);
  r.predicted = predicted;
  r.ground_truth = ground_truth;
  r.abs_error = std::abs(predicted - ground_truth);
  if (ground_truth > 0.0) r.relative_error = r.abs_error / ground_truth;
  return r;
}

std::vector<AccuracyBin> binned_accuracy(std::span<const ImageResult> per_image, double bin_width,
                                         double max_bin) {
  if (!(bin_width > 0.0)) throw ShapeError("binned_accuracy: bin_width must be > 0");
  if (!(max_bin > 0.0)) throw ShapeError("binned_accuracy: max_bin must be > 0");
  const auto regular = static_cast<std::size_t>(std::ceil(max_bin / bin_width));
  std::vector<AccuracyBin> bins(regular + 1);
  for (std::size_t b = 0; b < regular; ++b) {
    bins[b].lo = static_cast<double>(b) * bin_width;
    bins[b].hi = std::min(static_cast<double>(b + 1) * bin_width, max_bin);
  }
  bins[regular].lo = max_bin;
  bins[regular].hi = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> members(bins.size());
  for (const auto& r : per_image) {
    if (!r.relative_error) continue;
    std::size_t b = r.ground_truth >= max_bin ? regular : static_cast<std::size_t>(std::floor(r.ground_truth / bin_width));
    b = std::min(b, regular);
    members[b].push_back(1.0 - *r.relative_error);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const auto& acc = members[b];
    bins[b].n_images = acc.size();
    if (acc.empty()) continue;
    const auto n = static_cast<double>(acc.size());
    const double mean = compensated_sum(acc) / n;
    CompensatedSum dev;
    for (double a : acc) dev.add((a - mean) * (a - mean));
    bins[b].mean_accuracy = mean;
    bins[b].std_accuracy = std::sqrt(dev.value() / n);
  }
  return bins;
}

MetricsReport make_report(std::vector<ImageResult> per_image, double bin_width, double max_bin) {
  MetricsReport report;
  std::vector<CountPair> pairs;
  pairs.reserve(per_image.size());
  for (const auto& r : per_image) pairs.push_back({r.predicted, r.ground_truth});
  report.totals = metrics(pairs);
  report.bins = binned_accuracy(per_image, bin_width, max_bin);
  report.per_image = std::move(per_image);
  return report;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.10g}", v);
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << "config,mae,mse,accuracy,params,added_params\n";
  for (const auto& row : rows) {
    const auto& t = row.report.totals;
    out << row.config << ',' << format_number(t.mae) << ',' << format_number(t.mse) << ','
        << (t.accuracy ? format_number(*t.accuracy) : std::string()) << ',' << row.params << ','
        << (row.added_params ? "Yes" : "No") << '\n';
  }
}

void write_bins_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << "config,bin_lo,bin_hi,n_images,mean_accuracy,std_accuracy\n";
  for (const auto& row : rows) {
    for (const auto& b : row.report.bins) {
      out << row.config << ',' << format_number(b.lo) << ',' << format_number(b.hi) << ','
          << b.n_images << ',' << format_number(b.mean_accuracy) << ','
          << format_number(b.std_accuracy) << '\n';
    }
  }
}

void write_per_image_csv(std::ostream& out, const MetricsReport& report) {
  out << "id,predicted,ground_truth,abs_error,relative_error\n";
  for (const auto& r : report.per_image) {
    out << r.id << ',' << format_number(r.predicted) << ',' << format_number(r.ground_truth) << ','
        << format_number(r.abs_error) << ','
        << (r.relative_error ? format_number(*r.relative_error) : std::string()) << '\n';
  }
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["mae"] = report.totals.mae;
  doc["mse"] = report.totals.mse;
  doc["accuracy"] = report.totals.accuracy ? nlohmann::ordered_json(*report.totals.accuracy) : nullptr;
  doc["accuracy_skipped"] = report.totals.accuracy_skipped;
  auto& images = doc["per_image"] = nlohmann::ordered_json::array();
  for (const auto& r : report.per_image) {
    images.push_back({{"id", r.id},
                      {"predicted", r.predicted},
                      {"ground_truth", r.ground_truth},
                      {"abs_error", r.abs_error},
                      {"relative_error", r.relative_error ? nlohmann::ordered_json(*r.relative_error) : nullptr}});
  }
  auto& bins = doc["bins"] = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", std::isinf(b.hi) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(b.hi)},
                    {"n_images", b.n_images},
                    {"mean_accuracy", b.mean_accuracy},
                    {"std_accuracy", b.std_accuracy}});
  }
  return doc.dump(2);
}

}  // namespace densattn
