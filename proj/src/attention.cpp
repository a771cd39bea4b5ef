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

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>

namespace densattn {

namespace {

struct KindName {
  AttentionKind kind;
  std::string_view label;
  std::string_view key;
};

constexpr std::array<KindName, 8> kKindNames{{
    {AttentionKind::None, "None", "none"},
    {AttentionKind::PFCA, "PFCA", "pfca"},
    {AttentionKind::SA, "SA", "sa"},
    {AttentionKind::PFCASA, "PFCASA", "pfcasa"},
    {AttentionKind::SimAM, "SimAM", "simam"},
    {AttentionKind::SE, "SE", "se"},
    {AttentionKind::CBAM, "CBAM", "cbam"},
    {AttentionKind::CAM, "CAM", "cam"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(AttentionKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.label;
  }
  return "?";
}

bool AttentionConfig::parameter_free() const {
  switch (kind) {
    case AttentionKind::SE:
    case AttentionKind::CBAM:
    case AttentionKind::CAM:
      return false;
    default:
      return true;
  }
}

void AttentionConfig::validate(Index channels) const {
  if (channels <= 0) throw ShapeError("attention: channel count must be positive");
  if (!(lambda > 0.0)) throw ShapeError(fmt::format("attention: lambda must be > 0, got {}", lambda));
  if (parameter_free()) return;
  if (reduction_ratio <= 0) {
    throw ShapeError(fmt::format("{}: reduction ratio must be positive, got {}", to_string(kind),
                                 reduction_ratio));
  }
  if (channels % reduction_ratio != 0) {
    throw ShapeError(fmt::format("{}: reduction ratio r={} does not divide {} channels",
                                 to_string(kind), reduction_ratio, channels));
  }
}

std::string AttentionConfig::label() const {
  std::string out(to_string(kind));
  if (!parameter_free()) out += fmt::format("(r={})", reduction_ratio);
  if (uses_sa() && sa_activation == SaActivation::Softmax) out += "(softmax)";
  return out;
}

std::string AttentionConfig::slug() const {
  std::string out = lower(to_string(kind));
  if (!parameter_free()) out += fmt::format("_r{}", reduction_ratio);
  if (uses_sa() && sa_activation == SaActivation::Softmax) out += "_softmax";
  return out;
}

AttentionConfig AttentionConfig::parse(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const std::string kind_text = lower(trim(text.substr(0, colon)));
  AttentionConfig cfg;
  bool found = false;
  for (const auto& k : kKindNames) {
    if (k.key == kind_text) {
      cfg.kind = k.kind;
      found = true;
    }
  }
  if (!found) throw ShapeError(fmt::format("unknown attention kind '{}'", kind_text));
  if (colon == std::string_view::npos) return cfg;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ShapeError(fmt::format("attention option '{}' is not key=value", item));
    }
    const std::string key = lower(trim(item.substr(0, eq)));
    const std::string value(trim(item.substr(eq + 1)));
    try {
      if (key == "lambda") {
        cfg.lambda = std::stod(value);
      } else if (key == "r") {
        cfg.reduction_ratio = std::stoi(value);
      } else if (key == "act" || key == "activation") {
        const std::string v = lower(value);
        if (v == "softmax") {
          cfg.sa_activation = SaActivation::Softmax;
        } else if (v == "sigmoid") {
          cfg.sa_activation = SaActivation::Sigmoid;
        } else {
          throw ShapeError(fmt::format("unknown SA activation '{}'", value));
        }
      } else {
        throw ShapeError(fmt::format("unknown attention option '{}'", key));
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ShapeError*>(&e)) throw;
      throw ShapeError(fmt::format("bad value '{}' for attention option '{}'", value, key));
    }
  }
  return cfg;
}

Index param_count(const AttentionConfig& cfg, Index channels) {
  cfg.validate(channels);
  const Index c = channels;
  const Index r = cfg.reduction_ratio;
  switch (cfg.kind) {
    case AttentionKind::SE:
      return 2 * c * (c / r);
    case AttentionKind::CBAM:
      return 2 * c * (c / r) + 2 * kCbamSpatialKernel * kCbamSpatialKernel;
    case AttentionKind::CAM: {
      const Index mip = cam_bottleneck(c, cfg.reduction_ratio);
      return (c * mip + mip) + 2 * mip + 2 * (mip * c + c);
    }
    default:
      return 0;
  }
}

BudgetReport budget_audit(Index base_params, const AttentionConfig& cfg, Index channels) {
  if (base_params <= 0) throw ShapeError("budget_audit: base parameter count must be positive");
  BudgetReport report;
  report.base_params = base_params;
  report.added_params = param_count(cfg, channels);
  report.ratio = static_cast<double>(report.added_params) / static_cast<double>(base_params);
  report.within_budget = report.ratio <= kParameterBudget;
  return report;
}

}  // namespace densattn
