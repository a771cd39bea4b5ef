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

#include "densattn/train.hpp"

#include <fmt/format.h>

namespace densattn {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ShapeError(fmt::format("train: lr must be >= 0, got {}", lr));
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ShapeError(fmt::format("train: momentum must be in [0, 1), got {}", momentum));
  if (!(weight_decay >= 0.0)) throw ShapeError(fmt::format("train: weight_decay must be >= 0, got {}", weight_decay));
  if (epochs < 0) throw ShapeError("train: epochs must be >= 0");
  if (batch_size < 1) throw ShapeError("train: batch_size must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ShapeError("train: val_fraction must be in [0, 1)");
  kernel.validate();
}

void write_training_log(std::ostream& out, const TrainingLog& log, bool record_wall_time) {
  out << "epoch,loss,val_mae,val_mse,wall_ms\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << format_number(e.loss) << ',' << format_number(e.val_mae) << ','
        << format_number(e.val_mse) << ',' << (record_wall_time ? fmt::format("{:.3f}", e.wall_ms) : "0") << '\n';
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                             std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = stream_rng(seed, 0x5B1, 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
  if (val_fraction > 0.0 && n >= 2) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, n > 0 ? n - 1 : 0);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

}  // namespace densattn
