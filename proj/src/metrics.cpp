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

#include "mbem/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "mbem/error.hpp"

namespace mbem {
namespace {

double choose2(std::int64_t k) {
  return static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
}

}  // namespace

double dataset_loglik(const DataMatrix& data, const MixtureParams& theta) {
  if (data.rows() < 1) throw Error(ErrorCode::kInvalidInput, "no data");
  if (data.cols() != theta.dim()) {
    throw Error(ErrorCode::kInvalidInput, "data dimension mismatch");
  }
  MixtureEvaluator eval(theta);
  double total = 0.0;
  for (Index i = 0; i < data.rows(); ++i) total += eval.log_density(row_span(data, i));
  return total;
}

LabelVector map_labels(const DataMatrix& data, const MixtureParams& theta) {
  if (data.cols() != theta.dim()) {
    throw Error(ErrorCode::kInvalidInput, "data dimension mismatch");
  }
  MixtureEvaluator eval(theta);
  std::vector<double> tau(static_cast<std::size_t>(theta.size()));
  LabelVector labels(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) {
    eval.responsibilities(row_span(data, i), tau);
    // max_element returns the first maximum.
    labels[static_cast<std::size_t>(i)] = static_cast<int>(
        std::max_element(tau.begin(), tau.end()) - tau.begin());
  }
  return labels;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidInput, "label vectors differ in length");
  }
  const auto n = static_cast<std::int64_t>(a.size());
  if (n < 2) throw Error(ErrorCode::kInvalidInput, "ARI needs n >= 2");

  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> rows;
  std::map<int, std::int64_t> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0.0;
  for (const auto& [key, count] : cells) index += choose2(count);
  double sum_a = 0.0;
  for (const auto& [key, count] : rows) sum_a += choose2(count);
  double sum_b = 0.0;
  for (const auto& [key, count] : cols) sum_b += choose2(count);

  const double expected = sum_a * sum_b / choose2(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<Index> solve_assignment(const Matrix& cost) {
  // Shortest augmenting path formulation with row/column potentials, O(g^3).
  const Index g = cost.rows();
  if (cost.cols() != g) throw Error(ErrorCode::kInvalidInput, "cost must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(g + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(g + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(g + 1), 0);  // col -> row
  std::vector<Index> way(static_cast<std::size_t>(g + 1), 0);
  for (Index i = 1; i <= g; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(g + 1), kInf);
    std::vector<bool> used(static_cast<std::size_t>(g + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Index j1 = 0;
      for (Index j = 1; j <= g; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= g; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(match[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(static_cast<std::size_t>(g));
  for (Index j = 1; j <= g; ++j) {
    row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return row_to_col;
}

double squared_error(const MixtureParams& estimate, const MixtureParams& truth) {
  if (estimate.size() != truth.size() || !(estimate.spec() == truth.spec())) {
    throw Error(ErrorCode::kInvalidInput, "parameter shapes differ");
  }
  const Index g = truth.size();
  // cost(z, k): estimate component z matched to true component k.
  Matrix cost(g, g);
  for (Index z = 0; z < g; ++z) {
    const Vector ez = estimate.flatten_component(z);
    for (Index k = 0; k < g; ++k) {
      const double dw = estimate.weights()[z] - truth.weights()[k];
      cost(z, k) = dw * dw + (ez - truth.flatten_component(k)).squaredNorm();
    }
  }

  // Matched costs are summed in ascending order, so the result depends only on
  // the set of matched pairs and not on how either side lists components.
  std::vector<double> matched(static_cast<std::size_t>(g));
  auto sorted_sum = [&matched] {
    std::sort(matched.begin(), matched.end());
    double total = 0.0;
    for (double c : matched) total += c;
    return total;
  };
  if (g > 8) {
    const auto assign = solve_assignment(cost.transpose());
    for (Index k = 0; k < g; ++k) {
      matched[static_cast<std::size_t>(k)] = cost(assign[static_cast<std::size_t>(k)], k);
    }
    return sorted_sum();
  }
  std::vector<Index> perm(static_cast<std::size_t>(g));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    for (Index k = 0; k < g; ++k) {
      matched[static_cast<std::size_t>(k)] = cost(perm[static_cast<std::size_t>(k)], k);
    }
    best = std::min(best, sorted_sum());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace mbem
