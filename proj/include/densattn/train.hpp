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

#ifndef DENSATTN_TRAIN_HPP
#define DENSATTN_TRAIN_HPP

#include "densattn/density.hpp"
#include "densattn/eval.hpp"
#include "densattn/io.hpp"
#include "densattn/model.hpp"
#include "densattn/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>

namespace densattn {

struct TrainConfig {
  double lr = 1e-6;
  double momentum = 0.95;
  double weight_decay = 5e-4;
  int epochs = 400;
  int batch_size = 1;
  std::uint64_t seed = 0;
  KernelSpec kernel = KernelSpec::adaptive();
  double val_fraction = 0.2;
  // Quadrant + random crops with mirrors; off trains on whole images.
  bool augment = true;
  // Load the best-validation weights back into the model after training.
  bool restore_best = true;

  void validate() const;
};

/// Raised when the loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (1 / 2N) * sum over the batch of squared per-pixel differences.
template <typename Scalar>
Tensor<Scalar> euclidean_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("euclidean_loss: prediction " + pred.shape().str() + " vs ground truth " +
                     gt.shape().str());
  }
  const auto n = static_cast<Scalar>(pred.shape().n);
  return affine(sum_all(square(pred - gt)), Scalar(1) / (Scalar(2) * n), Scalar(0));
}

/// Momentum SGD with coupled L2 decay on conv weights:
///   v <- momentum * v + (grad + decay * w),  w <- w - lr * v.
template <typename Scalar>
class Sgd {
 public:
  explicit Sgd(const TrainConfig& cfg) : lr_(cfg.lr), momentum_(cfg.momentum), decay_(cfg.weight_decay) {}

  void step(ParamStore<Scalar>& store) {
    for (auto& [name, param] : store) {
      if (!param.has_grad()) throw ShapeError("sgd_step: parameter '" + name + "' has no gradient");
    }
    for (auto& [name, param] : store) {
      auto& velocity = velocity_[name];
      if (velocity.size() == 0) velocity = Tensor<Scalar>::Array::Zero(param.size());
      const Scalar decay = decays(name) ? static_cast<Scalar>(decay_) : Scalar(0);
      velocity = static_cast<Scalar>(momentum_) * velocity + (param.grad() + decay * param.data());
      param.mutable_data() -= static_cast<Scalar>(lr_) * velocity;
    }
  }

  static bool decays(const std::string& name) {
    constexpr std::string_view suffix = "weight";
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  const std::map<std::string, typename Tensor<Scalar>::Array>& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  double decay_;
  std::map<std::string, typename Tensor<Scalar>::Array> velocity_;
};

template <typename Scalar>
void sgd_step(ParamStore<Scalar>& store, Sgd<Scalar>& optimizer) {
  optimizer.step(store);
}

/// An image [1, C, H, W] with its full-resolution ground-truth density.
template <typename Scalar>
struct Sample {
  std::string id;
  Tensor<Scalar> image;
  DensityMap density;
};

template <typename Scalar>
Tensor<Scalar> crop_image(const Tensor<Scalar>& image, Index top, Index left, Index height, Index width) {
  const Shape s = image.shape();
  if (top < 0 || left < 0 || top + height > s.h || left + width > s.w) {
    throw ShapeError("crop_image outside " + s.str());
  }
  Tensor<Scalar> out({s.n, s.c, height, width});
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < s.c; ++c) {
      for (Index y = 0; y < height; ++y) {
        for (Index x = 0; x < width; ++x) out.at(n, c, y, x) = image(n, c, top + y, left + x);
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> flip_image(const Tensor<Scalar>& image) {
  const Shape s = image.shape();
  Tensor<Scalar> out(s);
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < s.c; ++c) {
      for (Index y = 0; y < s.h; ++y) {
        for (Index x = 0; x < s.w; ++x) out.at(n, c, y, x) = image(n, c, y, s.w - 1 - x);
      }
    }
  }
  return out;
}

/**
 * Nine quarter-size crops (four quadrants, then five uniformly placed
 * crops) each followed by its horizontal mirror: 18 pairs, quadrant first.
 */
template <typename Scalar>
std::vector<Sample<Scalar>> make_patches(const Sample<Scalar>& sample, Rng& rng) {
  const Shape s = sample.image.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("make_patches needs even image dimensions, got " + s.str() + "; pad the image first");
  }
  if (sample.density.height() != s.h || sample.density.width() != s.w) {
    throw ShapeError("make_patches: density map does not match image size");
  }
  const Index ph = s.h / 2;
  const Index pw = s.w / 2;
  std::vector<std::pair<Index, Index>> corners{{0, 0}, {0, pw}, {ph, 0}, {ph, pw}};
  std::uniform_int_distribution<Index> top(0, s.h - ph);
  std::uniform_int_distribution<Index> left(0, s.w - pw);
  for (int i = 0; i < 5; ++i) {
    const Index t = top(rng);
    corners.emplace_back(t, left(rng));
  }
  std::vector<Sample<Scalar>> out;
  out.reserve(18);
  int k = 0;
  for (const auto& [t, l] : corners) {
    Sample<Scalar> patch{sample.id + "#" + std::to_string(k++), crop_image(sample.image, t, l, ph, pw),
                         crop(sample.density, t, l, ph, pw)};
    Sample<Scalar> mirror{patch.id + "f", flip_image(patch.image), flip_horizontal(patch.density)};
    out.push_back(std::move(patch));
    out.push_back(std::move(mirror));
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> density_tensor(const DensityMap& map) {
  Tensor<Scalar> t({1, 1, map.height(), map.width()});
  for (Index i = 0; i < map.height(); ++i) {
    for (Index j = 0; j < map.width(); ++j) t.at(0, 0, i, j) = static_cast<Scalar>(map.values(i, j));
  }
  return t;
}

/// Concatenates [1, C, H, W] tensors along the batch axis.
template <typename Scalar>
Tensor<Scalar> stack_batch(std::span<const Tensor<Scalar>> items) {
  if (items.empty()) throw ShapeError("stack_batch: empty batch");
  const Shape s = items.front().shape();
  typename Tensor<Scalar>::Array values(s.size() * static_cast<Index>(items.size()));
  Index offset = 0;
  for (const auto& t : items) {
    if (t.shape() != s) throw ShapeError("stack_batch: mixed shapes " + s.str() + " vs " + t.shape().str());
    values.segment(offset, t.size()) = t.data();
    offset += t.size();
  }
  return Tensor<Scalar>({s.n * static_cast<Index>(items.size()), s.c, s.h, s.w}, std::move(values));
}

/// Predicted count for each sample, evaluated without gradient recording.
template <typename Scalar>
std::vector<ImageResult> evaluate_model(const Model<Scalar>& model, std::span<const Sample<Scalar>> samples) {
  std::vector<ImageResult> results(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    NoGradGuard no_grad;
    const auto pred = model.forward(samples[i].image);
    results[i] = ImageResult::make(samples[i].id, static_cast<double>(pred.data().template cast<double>().sum()),
                                   samples[i].density.count());
  });
  return results;
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_mae = 0.0;
  double val_mse = 0.0;
  double wall_ms = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_mae = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

/// epoch,loss,val_mae,val_mse,wall_ms. With record_wall_time off the last
/// column is 0.
void write_training_log(std::ostream& out, const TrainingLog& log, bool record_wall_time = true);

struct TrainOutputs {
  std::optional<std::filesystem::path> log_csv;
  std::optional<std::filesystem::path> checkpoint;
  bool record_wall_time = true;
};

/// Deterministic split: val = the first round(fraction * n) indices of a
/// seeded permutation (at least one when fraction > 0 and n >= 2).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                             std::uint64_t seed);

/// Seeded stream for per-image augmentation and per-epoch shuffling.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/**
 * Trains `model` with momentum SGD on the Euclidean density loss and
 * tracks count MAE on a held-out split (the training split itself when the
 * split is empty). Deterministic given cfg.seed and the model's seed.
 */
template <typename Scalar>
TrainingLog train_loop(Model<Scalar>& model, std::span<const Sample<Scalar>> dataset, const TrainConfig& cfg,
                       const TrainOutputs& outputs = {}) {
  cfg.validate();
  if (dataset.empty()) throw ShapeError("train_loop: empty dataset");
  const Index stride = model.config().output_stride();

  TrainingLog log;
  std::tie(log.train_indices, log.val_indices) = split_indices(dataset.size(), cfg.val_fraction, cfg.seed);

  struct Item {
    Tensor<Scalar> image;
    Tensor<Scalar> target;
  };
  std::vector<Item> items;
  for (std::size_t idx : log.train_indices) {
    const auto& sample = dataset[idx];
    auto add = [&](const Sample<Scalar>& s) {
      items.push_back({s.image, density_tensor<Scalar>(downsample_sum(s.density, stride))});
    };
    if (cfg.augment) {
      Rng rng = stream_rng(cfg.seed, 0xA06, idx);
      for (const auto& patch : make_patches(sample, rng)) add(patch);
    } else {
      add(sample);
    }
  }
  std::vector<Sample<Scalar>> val;
  for (std::size_t idx : (log.val_indices.empty() ? log.train_indices : log.val_indices)) val.push_back(dataset[idx]);

  Sgd<Scalar> optimizer(cfg);
  std::vector<typename Tensor<Scalar>::Array> best;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(items.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = stream_rng(cfg.seed, 0x5F0, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      std::vector<Tensor<Scalar>> images;
      std::vector<Tensor<Scalar>> targets;
      for (std::size_t k = b; k < std::min(order.size(), b + batch); ++k) {
        images.push_back(items[order[k]].image);
        targets.push_back(items[order[k]].target);
      }
      model.params().zero_grad();
      Tensor<Scalar> loss = euclidean_loss(model.forward(stack_batch<Scalar>(images)),
                                           stack_batch<Scalar>(targets));
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(steps + 1));
      }
      loss.backward();
      optimizer.step(model.params());
      loss_sum += value;
      ++steps;
    }

    const auto results = evaluate_model<Scalar>(model, val);
    std::vector<CountPair> pairs;
    for (const auto& r : results) pairs.push_back({r.predicted, r.ground_truth});
    const CountMetrics m = metrics(pairs);
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(steps), m.mae, m.mse, wall});
    if (!std::isfinite(m.mae)) {
      throw TrainingDiverged("validation count became non-finite at epoch " + std::to_string(epoch));
    }
    if (m.mae < log.best_val_mae) {
      log.best_val_mae = m.mae;
      log.best_epoch = epoch;
      best.clear();
      for (const auto& [_, p] : model.params()) best.push_back(p.data());
    }
  }

  if (cfg.restore_best && !best.empty()) {
    std::size_t k = 0;
    for (auto& [_, p] : model.params()) p.mutable_data() = best[k++];
  }
  if (outputs.checkpoint) {
    auto entries = to_named_arrays(model.params());
    if (!cfg.restore_best && !best.empty()) {
      for (std::size_t k = 0; k < entries.size(); ++k) {
        entries[k].values.assign(best[k].data(), best[k].data() + best[k].size());
      }
    }
    write_checkpoint(*outputs.checkpoint, entries);
  }
  if (outputs.log_csv) {
    std::ofstream out(*outputs.log_csv);
    if (!out) throw InputError("cannot write training log " + outputs.log_csv->string());
    write_training_log(out, log, outputs.record_wall_time);
  }
  return log;
}

}  // namespace densattn

#endif  // DENSATTN_TRAIN_HPP
