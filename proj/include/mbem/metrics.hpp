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

#ifndef MBEM_METRICS_HPP_
#define MBEM_METRICS_HPP_

#include <span>
#include <vector>

#include "mbem/linalg.hpp"
#include "mbem/mixture.hpp"

namespace mbem {

using LabelVector = std::vector<int>;

struct MetricReport {
  double loglik = 0.0;
  double se = 0.0;
  double ari = 0.0;
  double runtime_seconds = 0.0;
};

// Total log-likelihood, summed in row order.
double dataset_loglik(const DataMatrix& data, const MixtureParams& theta);

// Zero-based argmax of the responsibilities; ties go to the lowest index.
LabelVector map_labels(const DataMatrix& data, const MixtureParams& theta);

// Hubert-Arabie adjusted Rand index. Labels may be arbitrary integers. When
// the expected and maximum index coincide (e.g. both partitions are a single
// cluster) the result is 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Squared Euclidean distance between flattened parameter vectors, minimized
// over relabelings of the estimate's components. Exhaustive over
// permutations for g <= 8, Hungarian assignment above.
double squared_error(const MixtureParams& estimate, const MixtureParams& truth);

// Minimum-cost perfect matching on a square cost matrix; returns, for each
// row, the assigned column.
std::vector<Index> solve_assignment(const Matrix& cost);

}  // namespace mbem

#endif  // MBEM_METRICS_HPP_
