// Copyright 2026 The mbem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON form of a mixture:
//
//   {"family": "gaussian",
//    "weights": [0.5, 0.5],
//    "components": [{"mean": [0, 0], "covariance": [[1, 0], [0, 1]]}, ...]}
//
// Count families use {"rate": r} per component.

#ifndef MBEM_MIXTURE_JSON_HPP_
#define MBEM_MIXTURE_JSON_HPP_

#include <string>

#include "json.hpp"
#include "mbem/mixture.hpp"

namespace mbem {

nlohmann::json to_json(const MixtureParams& theta);
MixtureParams mixture_from_json(const nlohmann::json& j);
MixtureParams read_mixture_file(const std::string& path);

}  // namespace mbem

#endif  // MBEM_MIXTURE_JSON_HPP_
