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

#pragma once

#include <array>
#include <string_view>

namespace neurolos {

inline constexpr int kNumClasses = 3;

enum class LosClass : int { kShort = 0, kMedium = 1, kLong = 2 };

std::string_view to_string(LosClass c);

// Half-open class boundaries in days: [0, short_upper), [short_upper,
// medium_upper), [medium_upper, inf).
struct BinEdges {
  double short_upper = 2.0;
  double medium_upper = 7.0;
  bool operator==(const BinEdges&) const = default;
};

// Throws kValidation for non-positive or non-finite los.
LosClass bin_los(double los_days, const BinEdges& edges = {});

}  // namespace neurolos
