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

// Batch, mini-batch and truncated mini-batch EM on sufficient statistics.
//
// A mini-batch iteration moves the running statistic toward the batch average
// of sbar at the previous parameter,
//
//   s_r = s_{r-1} + gamma_r * (mean_i sbar(y_i; theta_{r-1}) - s_{r-1}),
//   theta_r = theta_bar(s_r),
//
// with batches drawn uniformly with replacement. N = 1 is online EM, and
// gamma = 1 with the full data as the batch is ordinary batch EM.
//
// The truncated variant keeps theta inside a growing sequence of compact
// regions K_0 c K_1 c ...; a proposal whose parameters leave K_m (or for
// which theta_bar is undefined) is replaced by a statistic projected into
// K_0, and m is incremented.

#ifndef MBEM_EM_HPP_
#define MBEM_EM_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mbem/linalg.hpp"
#include "mbem/mixture.hpp"

namespace mbem {

// gamma_r = gamma0 * r^(-alpha), gamma0 in (0, 1), alpha in (1/2, 1].
struct LearningRate {
  double gamma0 = 1.0 - 1e-10;
  double alpha = 0.6;

  void validate() const;
  double operator()(std::int64_t r) const;
};

double schedule(const LearningRate& lr, std::int64_t r);

struct TruncationRegion {
  double c1 = 1000.0;
  double c2 = 1000.0;
  double c3 = 1000.0;
  std::int64_t m = 0;
  std::int64_t events = 0;

  void validate() const;
  double weight_floor() const { return 1.0 / (c1 + static_cast<double>(m)); }
  double mean_bound() const { return c2 + static_cast<double>(m); }
  double eigen_lower() const { return 1.0 / (c3 + static_cast<double>(m)); }
  double eigen_upper() const { return c3 + static_cast<double>(m); }
  // Same constants at level 0.
  TruncationRegion base() const { return {c1, c2, c3, 0, 0}; }
};

// True iff theta lies in K_m. Gaussian: pi_z >= 1/(c1+m), every mean
// coordinate in [-(c2+m), c2+m], covariance eigenvalues in
// [1/(c3+m), c3+m]. Count families: weight floor plus rates in
// [1/(c3+m), c3+m]. Bounds are compared with a relative slack of 1e-10.
bool region_contains(const MixtureParams& theta, const TruncationRegion& region);

// Maps a statistic to the nearest-by-construction point of K_0 for `region`:
// weights floored at 1/c1 and renormalized, mean coordinates clipped to
// [-c2, c2], covariance eigenvalues (or rates) clipped into [1/c3, c3]. The
// statistic need not have a valid theta_bar, but every s1 must exceed the
// empty-component floor.
SuffStats project_to_region(const SuffStats& s, const TruncationRegion& region);

struct EmState {
  SuffStats stats;
  MixtureParams theta;
  std::int64_t iteration = 0;
  TruncationRegion region;
  bool averaging = false;
  std::optional<MixtureParams> polyak;
};

EmState make_state(SuffStats stats, MixtureParams theta,
                   TruncationRegion region = {}, bool averaging = false);

// Batch average of sbar over the given rows (all rows when `rows` is empty),
// summed in row order.
SuffStats mean_sbar(const DataMatrix& data, std::span<const Index> rows,
                    const MixtureParams& theta);
SuffStats mean_sbar(const DataMatrix& data, const MixtureParams& theta);

MixtureParams batch_em_step(const DataMatrix& data, const MixtureParams& theta);

SuffStats init_suffstats(const DataMatrix& data, std::span<const Index> batch,
                         const MixtureParams& theta0);

EmState minibatch_step(const EmState& state, const DataMatrix& data,
                       std::span<const Index> batch, double gamma);

// Draws `size` row indices uniformly with replacement.
std::vector<Index> draw_batch(Index n, Index size, std::mt19937_64& rng);

inline constexpr int kMaxResetAttempts = 16;

// Replacement statistic for a rejected proposal: the average sbar of a fresh
// batch at the last accepted theta, projected into K_0. Components the batch
// leaves empty are rebuilt from the last accepted theta at the K_0 weight
// floor. Up to kMaxResetAttempts batches are drawn before giving up with
// kUnrecoverableTruncation.
SuffStats reset_stat(const EmState& state, const DataMatrix& data,
                     Index batch_size, std::mt19937_64& rng);

// `rng` is only consumed when the proposal is rejected.
EmState truncated_minibatch_step(const EmState& state, const DataMatrix& data,
                                 std::span<const Index> batch, double gamma,
                                 std::mt19937_64& rng);

// Running mean: theta_A(i) = ((i - 1) theta_A(i-1) + theta(i)) / i.
MixtureParams polyak_update(const std::optional<MixtureParams>& average,
                            const MixtureParams& latest, std::int64_t i);

enum class Algorithm { kBatchEm, kMiniBatch, kTruncatedMiniBatch };

std::string_view to_string(Algorithm algorithm);
Algorithm algorithm_from_string(std::string_view name);

struct RunConfig {
  Algorithm algorithm = Algorithm::kMiniBatch;
  Index batch_size = 1;
  LearningRate lr;
  TruncationRegion truncation;
  int epochs = 10;
  bool polyak = false;
  // Keep every iterate (raw theta), not only the epoch-boundary trace.
  bool keep_iterates = false;
};

struct TracePoint {
  std::int64_t iteration = 0;
  MixtureParams theta;
  std::optional<MixtureParams> polyak;
  std::int64_t truncation_level = 0;
};

struct RunRecord {
  MixtureParams theta;                  // final raw iterate
  std::optional<MixtureParams> polyak;  // final running average
  std::vector<TracePoint> trace;        // epoch 0 .. epochs
  std::vector<MixtureParams> iterates;  // only with keep_iterates
  std::int64_t iterations = 0;
  std::int64_t points_visited = 0;
  std::int64_t truncation_events = 0;
  std::int64_t truncation_level = 0;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;

  // The reported estimate: the average when averaging was enabled.
  const MixtureParams& estimate() const { return polyak ? *polyak : theta; }
};

std::int64_t iterations_per_epoch(Index n, Index batch_size);

// Executes `config.epochs` epochs of the chosen algorithm. Mini-batch runs
// perform epochs * ceil(n / N) iterations; the initial statistic is the
// average sbar at `init` over one additional batch drawn before the loop.
// Engine errors are rethrown as IterationError.
RunRecord run(const DataMatrix& data, const RunConfig& config,
              const MixtureParams& init, std::mt19937_64& rng);

// CPU time consumed by the calling thread.
double thread_cpu_seconds();

}  // namespace mbem

#endif  // MBEM_EM_HPP_
