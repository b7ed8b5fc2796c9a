/*
 * Copyright 2026 The NeuroLOS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "neurolos/los.hpp"

#include <cmath>
#include <string>

#include "neurolos/common.hpp"

namespace neurolos {

std::string_view to_string(LosClass c) {
  switch (c) {
    case LosClass::kShort: return "short";
    case LosClass::kMedium: return "medium";
    case LosClass::kLong: return "long";
  }
  return "unknown";
}

LosClass bin_los(double los_days, const BinEdges& edges) {
  require(std::isfinite(los_days) && los_days > 0.0, ErrorKind::kValidation,
          "los must be a positive number of days, got " + format_double(los_days));
  if (los_days < edges.short_upper) return LosClass::kShort;
  if (los_days < edges.medium_upper) return LosClass::kMedium;
  return LosClass::kLong;
}

}  // namespace neurolos
