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

#ifndef DENSATTN_VERIFY_HPP
#define DENSATTN_VERIFY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace densattn::verify {

enum class Mutation { None, PfcaDenominator };

Mutation parse_mutation(std::string_view text);

struct Options {
  std::string filter;  // substring of the check name; empty runs everything
  Mutation mutation = Mutation::None;
  int oracle_trials = 50;
  int grad_seeds = 5;
  std::uint64_t seed = 2024;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst error / value seen
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct Check {
  std::string name;
  std::function<CheckResult(const Options&)> run;
};

/// Every registered check, in a fixed order.
const std::vector<Check>& registry();

std::vector<CheckResult> run(const Options& opt);

/// {"passed": bool, "checks": [{name, passed, measured, tolerance, detail, seconds}, ...]}
std::string summary_json(const std::vector<CheckResult>& results);

}  // namespace densattn::verify

#endif  // DENSATTN_VERIFY_HPP
