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

// Config <-> JSON parameter blocks shared by the models and the registry.

#pragma once

#include "json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml::detail {

inline constexpr const char* kModelFormat = "neurolos-model";

nlohmann::json to_params(const KnnConfig& cfg);
nlohmann::json to_params(const TreeConfig& cfg);
nlohmann::json to_params(const ForestConfig& cfg);
nlohmann::json to_params(const BoostConfig& cfg);
nlohmann::json to_params(const SvmConfig& cfg);

KnnConfig knn_config(const nlohmann::json& params);
TreeConfig tree_config(const nlohmann::json& params, std::uint64_t seed);
ForestConfig forest_config(const nlohmann::json& params, std::uint64_t seed);
BoostConfig boost_config(const nlohmann::json& params, Growth growth, std::uint64_t seed);
SvmConfig svm_config(const nlohmann::json& params, std::uint64_t seed);

nlohmann::json envelope(const std::string& kind, nlohmann::json config, nlohmann::json params);
// Checks format/version/kind and returns the envelope for field access.
const nlohmann::json& check_envelope(const nlohmann::json& j, const std::string& kind);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace neurolos::ml::detail
