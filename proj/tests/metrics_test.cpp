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


#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mbem/error.hpp"
#include "mbem/metrics.hpp"
#include "test_util.hpp"

using namespace mbem;
using mbem::testing::gaussian_1d;

namespace {

// Adjusted Rand index by enumerating every unordered pair of points.
double pair_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa;
      only_b += sb;
      total += 1;
    }
  const double expected = only_a * only_b / total;
  const double max = 0.5 * (only_a + only_b);
  if (max == expected) return 1.0;
  return (both - expected) / (max - expected);
}

std::vector<int> random_labels(std::size_t n, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<int> relabel(const std::vector<int>& v, std::mt19937_64& rng) {
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 100);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> out;
  for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)]);
  return out;
}

MixtureParams reversed(const MixtureParams& t) {
  std::vector<ComponentParams> comps(t.components().rbegin(), t.components().rend());
  return MixtureParams(t.weights().reverse(), comps);
}

}  // namespace

TEST_CASE("dataset log-likelihood") {
  const auto theta = gaussian_1d({0.3, 0.7}, {-1.0, 2.0}, {1.0, 0.5});
  const DataMatrix one = testing::column({0.4});
  CHECK(dataset_loglik(one, theta) == log_density(Vector::Constant(1, 0.4), theta));

  const auto std_normal = gaussian_1d({1.0}, {0.0}, {1.0});
  CHECK(dataset_loglik(testing::column({0.0, 0.0}), std_normal) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const auto data = sample(theta, 200, rng).data;
  DataMatrix doubled(400, 1);
  doubled << data, data;
  CHECK(dataset_loglik(doubled, theta) ==
        doctest::Approx(2.0 * dataset_loglik(data, theta)).epsilon(1e-14));
  CHECK(dataset_loglik(data, theta) ==
        doctest::Approx(dataset_loglik(data.topRows(77), theta) +
                        dataset_loglik(data.bottomRows(123), theta))
            .epsilon(1e-14));
}

TEST_CASE("MAP labels") {
  const auto g1 = gaussian_1d({1.0}, {0.0}, {1.0});
  for (int l : map_labels(testing::column({-3, 0, 5}), g1)) CHECK(l == 0);
  const auto sym = gaussian_1d({0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0});
  CHECK(map_labels(testing::column({0.0}), sym)[0] == 0);

  const auto sep = gaussian_1d({0.5, 0.5}, {-10.0, 10.0}, {1.0, 1.0});
  std::mt19937_64 rng(2);
  const auto draw = sample(sep, 2000, rng);
  CHECK(adjusted_rand_index(map_labels(draw.data, sep), draw.labels) == 1.0);
}

TEST_CASE("adjusted Rand index examples") {
  const std::vector<int> a{1, 1, 2, 2};
  const std::vector<int> b{1, 2, 1, 2};
  CHECK(adjusted_rand_index(a, a) == 1.0);
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(pair_ari(a, b)).epsilon(1e-12));
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5));
  const std::vector<int> c{0, 0, 0, 0};
  CHECK(adjusted_rand_index(a, c) == 0.0);
  CHECK(adjusted_rand_index(c, c) == 1.0);
  const std::vector<int> shorter{0, 1, 2};
  CHECK_THROWS_AS(adjusted_rand_index(a, shorter), Error);
}

TEST_CASE("adjusted Rand index properties") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 12), k(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    const auto a = random_labels(n, k(rng), rng);
    const auto b = random_labels(n, k(rng), rng);
    const double v = adjusted_rand_index(a, b);
    CHECK(std::abs(v - pair_ari(a, b)) <= 1e-12);
    CHECK(v <= 1.0);
    CHECK(adjusted_rand_index(b, a) == v);
    CHECK(adjusted_rand_index(relabel(a, rng), b) == v);
    CHECK(adjusted_rand_index(a, relabel(b, rng)) == v);
  }
}

TEST_CASE("squared error examples") {
  std::mt19937_64 rng(4);
  const auto t = testing::random_gaussian_mixture(3, 2, rng);
  CHECK(squared_error(t, t) == 0.0);
  CHECK(squared_error(reversed(t), t) == 0.0);
  CHECK(squared_error(gaussian_1d({1.0}, {1.0}, {2.0}), gaussian_1d({1.0}, {0.0}, {1.0})) ==
        2.0);
  CHECK_THROWS_AS(squared_error(t, gaussian_1d({1.0}, {0.0}, {1.0})), Error);
}

TEST_CASE("squared error is permutation invariant and separates classes") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Index g = 2 + trial % 4;
    const auto a = testing::random_gaussian_mixture(g, 2, rng);
    const auto b = testing::random_gaussian_mixture(g, 2, rng);
    const double v = squared_error(a, b);
    CHECK(v > 0.0);
    CHECK(squared_error(reversed(a), b) == v);
    CHECK(squared_error(a, reversed(b)) == v);
    CHECK(v <= (a.flatten() - b.flatten()).squaredNorm() + 1e-12);
  }
}

TEST_CASE("assignment matches brute force") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Index g = 1 + trial % 7;
    Matrix cost(g, g);
    for (Index i = 0; i < g; ++i)
      for (Index j = 0; j < g; ++j) cost(i, j) = u(rng);
    const auto assign = solve_assignment(cost);
    double got = 0.0;
    for (Index i = 0; i < g; ++i) got += cost(i, assign[static_cast<std::size_t>(i)]);
    std::vector<Index> perm(static_cast<std::size_t>(g));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double c = 0.0;
      for (Index i = 0; i < g; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("squared error above the enumeration limit") {
  std::mt19937_64 rng(7);
  const auto t = testing::random_gaussian_mixture(10, 1, rng);
  std::vector<ComponentParams> comps(t.components().begin(), t.components().end());
  Vector w = t.weights();
  std::vector<Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ComponentParams> shuffled;
  Vector sw(10);
  for (Index k = 0; k < 10; ++k) {
    shuffled.push_back(comps[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    sw[k] = w[order[static_cast<std::size_t>(k)]];
  }
  CHECK(squared_error(MixtureParams(sw, shuffled), t) == 0.0);
}
