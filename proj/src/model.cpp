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

#include "densattn/model.hpp"

namespace densattn {

std::string_view to_string(InitScheme s) {
  switch (s) {
    case InitScheme::Gaussian:
      return "gaussian";
    case InitScheme::HeFrontend:
      return "he_frontend";
    case InitScheme::He:
      return "he";
  }
  return "?";
}

InitScheme parse_init_scheme(std::string_view text) {
  for (auto s : {InitScheme::Gaussian, InitScheme::HeFrontend, InitScheme::He}) {
    if (to_string(s) == text) return s;
  }
  throw ShapeError("unknown init scheme '" + std::string(text) +
                   "' (expected gaussian, he_frontend or he)");
}

}  // namespace densattn
