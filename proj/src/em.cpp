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

#include "mbem/em.hpp"

#include <time.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "mbem/error.hpp"

namespace mbem {
namespace {

constexpr double kBoundSlack = 1e-10;

bool at_least(double value, double bound) {
  return value >= bound * (1.0 - kBoundSlack);
}
bool at_most(double value, double bound) {
  return value <= bound * (1.0 + kBoundSlack);
}

// theta_bar failures that place a proposal outside every K_m.
bool is_domain_failure(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kEmptyComponent:
    case ErrorCode::kDegenerateCovariance:
    case ErrorCode::kNumericDomain:
      return true;
    default:
      return false;
  }
}

// Floors every weight at `floor` while keeping the unfloored weights in their
// original proportions and the total at one.
Vector floor_weights(const Vector& w, double floor) {
  const Index g = w.size();
  std::vector<bool> pinned(static_cast<std::size_t>(g), false);
  Vector out = w;
  for (Index pass = 0; pass <= g; ++pass) {
    Index n_pinned = 0;
    double free_sum = 0.0;
    for (Index z = 0; z < g; ++z) {
      if (pinned[static_cast<std::size_t>(z)]) {
        ++n_pinned;
      } else {
        free_sum += w[z];
      }
    }
    const double free_mass = 1.0 - static_cast<double>(n_pinned) * floor;
    bool changed = false;
    for (Index z = 0; z < g; ++z) {
      if (pinned[static_cast<std::size_t>(z)]) {
        out[z] = floor;
        continue;
      }
      out[z] = n_pinned == 0 ? w[z] : w[z] * free_mass / free_sum;
      if (out[z] < floor) {
        pinned[static_cast<std::size_t>(z)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

double clip_rate(double rate, double lo, double hi) {
  if (std::isnan(rate)) return lo;
  return std::clamp(rate, lo, hi);
}

}  // namespace

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

// ---------------------------------------------------------------------------
// Learning rate and truncation region

void LearningRate::validate() const {
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "gamma0 must lie in (0, 1)");
  }
  if (!(alpha > 0.5 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "alpha must lie in (1/2, 1]");
  }
}

double LearningRate::operator()(std::int64_t r) const {
  if (r < 1) throw Error(ErrorCode::kInvalidInput, "iterate index must be >= 1");
  return gamma0 * std::pow(static_cast<double>(r), -alpha);
}

double schedule(const LearningRate& lr, std::int64_t r) { return lr(r); }

void TruncationRegion::validate() const {
  if (!(c1 >= 1.0 && c2 >= 1.0 && c3 >= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "truncation constants must be >= 1");
  }
  if (m < 0) throw Error(ErrorCode::kInvalidInput, "truncation index < 0");
}

bool region_contains(const MixtureParams& theta, const TruncationRegion& region) {
  const double w_floor = region.weight_floor();
  for (Index z = 0; z < theta.size(); ++z) {
    if (!at_least(theta.weights()[z], w_floor)) return false;
  }
  const double lo = region.eigen_lower();
  const double hi = region.eigen_upper();
  if (theta.family() != Family::kGaussian) {
    for (Index z = 0; z < theta.size(); ++z) {
      const double rate = theta.rate(z);
      if (!at_least(rate, lo) || !at_most(rate, hi)) return false;
    }
    return true;
  }
  const double box = region.mean_bound();
  for (Index z = 0; z < theta.size(); ++z) {
    const auto& c = theta.gaussian(z);
    if (!at_most(c.mean.cwiseAbs().maxCoeff(), box)) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.covariance,
                                              Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();  // ascending
    if (!at_least(ev[0], lo) || !at_most(ev[ev.size() - 1], hi)) return false;
  }
  return true;
}

SuffStats project_to_region(const SuffStats& s, const TruncationRegion& region) {
  const TruncationRegion k0 = region.base();
  const Index g = s.size();
  const Index d = s.spec.dim;
  if (static_cast<double>(g) * k0.weight_floor() > 1.0) {
    throw Error(ErrorCode::kInvalidInput,
                "c1 too small for g components: K_0 is empty");
  }
  double total = 0.0;
  for (Index z = 0; z < g; ++z) {
    if (!(s.s1[z] > kS1Floor)) {
      throw Error(ErrorCode::kEmptyComponent,
                  "cannot project statistic with an empty component");
    }
    total += s.s1[z];
  }
  const Vector weights = floor_weights(s.s1 / total, k0.weight_floor());
  const double lo = k0.eigen_lower();
  const double hi = k0.eigen_upper();

  std::vector<ComponentParams> comps;
  comps.reserve(g);
  for (Index z = 0; z < g; ++z) {
    const double mass = s.s1[z];
    switch (s.spec.family) {
      case Family::kGaussian: {
        Vector mean = s.s2.col(z) / mass;
        for (Index i = 0; i < d; ++i) {
          mean[i] = std::clamp(mean[i], -k0.mean_bound(), k0.mean_bound());
        }
        Matrix cov(d, d);
        Index k = 0;
        const Vector raw_mean = s.s2.col(z) / mass;
        for (Index i = 0; i < d; ++i)
          for (Index j = i; j < d; ++j) {
            const double v = s.s3(k++, z) / mass - raw_mean[i] * raw_mean[j];
            cov(i, j) = v;
            cov(j, i) = v;
          }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        Vector ev = eig.eigenvalues();
        bool clipped = false;
        for (Index i = 0; i < d; ++i) {
          const double c = std::isnan(ev[i]) ? lo : std::clamp(ev[i], lo, hi);
          if (c != ev[i]) clipped = true;
          ev[i] = c;
        }
        if (clipped) {
          const Matrix& v = eig.eigenvectors();
          cov = v * ev.asDiagonal() * v.transpose();
          cov = 0.5 * (cov + cov.transpose()).eval();
        }
        comps.emplace_back(GaussianComponent{std::move(mean), std::move(cov)});
        break;
      }
      case Family::kExponential: {
        const double m1 = s.s2(0, z);
        const double rate = m1 > 0.0 ? mass / m1
                                     : std::numeric_limits<double>::infinity();
        comps.emplace_back(ExponentialComponent{clip_rate(rate, lo, hi)});
        break;
      }
      case Family::kPoisson:
        comps.emplace_back(PoissonComponent{clip_rate(s.s2(0, z) / mass, lo, hi)});
        break;
    }
  }
  return stats_from_params(MixtureParams(weights, std::move(comps)));
}

// ---------------------------------------------------------------------------
// Steps

EmState make_state(SuffStats stats, MixtureParams theta, TruncationRegion region,
                   bool averaging) {
  region.validate();
  return EmState{std::move(stats), std::move(theta), 0, region, averaging,
                 std::nullopt};
}

SuffStats mean_sbar(const DataMatrix& data, std::span<const Index> rows,
                    const MixtureParams& theta) {
  if (data.cols() != theta.dim()) {
    throw Error(ErrorCode::kInvalidInput, "data dimension mismatch");
  }
  MixtureEvaluator eval(theta);
  SuffStats s = SuffStats::zeros(theta.spec(), theta.size());
  Index count = 0;
  if (rows.empty()) {
    for (Index i = 0; i < data.rows(); ++i) eval.accumulate_sbar(row_span(data, i), 1.0, s);
    count = data.rows();
  } else {
    for (Index i : rows) eval.accumulate_sbar(row_span(data, i), 1.0, s);
    count = static_cast<Index>(rows.size());
  }
  if (count < 1) throw Error(ErrorCode::kInvalidInput, "empty batch");
  s.scale(1.0 / static_cast<double>(count));
  return s;
}

SuffStats mean_sbar(const DataMatrix& data, const MixtureParams& theta) {
  return mean_sbar(data, {}, theta);
}

MixtureParams batch_em_step(const DataMatrix& data, const MixtureParams& theta) {
  return theta_bar(mean_sbar(data, theta));
}

SuffStats init_suffstats(const DataMatrix& data, std::span<const Index> batch,
                         const MixtureParams& theta0) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidInput, "empty batch");
  return mean_sbar(data, batch, theta0);
}

namespace {

EmState advance(const EmState& prev, SuffStats stats, MixtureParams theta) {
  EmState next{std::move(stats), std::move(theta), prev.iteration + 1,
               prev.region, prev.averaging, prev.polyak};
  if (next.averaging) {
    next.polyak = polyak_update(next.polyak, next.theta, next.iteration);
  }
  return next;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "step size must lie in (0, 1]");
  }
}

}  // namespace

EmState minibatch_step(const EmState& state, const DataMatrix& data,
                       std::span<const Index> batch, double gamma) {
  check_gamma(gamma);
  SuffStats s = state.stats;
  s.step_toward(mean_sbar(data, batch, state.theta), gamma);
  MixtureParams theta = theta_bar(s);
  return advance(state, std::move(s), std::move(theta));
}

std::vector<Index> draw_batch(Index n, Index size, std::mt19937_64& rng) {
  if (n < 1 || size < 1) throw Error(ErrorCode::kInvalidInput, "empty batch");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(size));
  for (auto& r : rows) r = pick(rng);
  return rows;
}

SuffStats reset_stat(const EmState& state, const DataMatrix& data,
                     Index batch_size, std::mt19937_64& rng) {
  // A component that the fresh batch leaves empty keeps the last accepted
  // parameters at the K_0 weight floor; projection then clips it into K_0.
  const SuffStats fallback = stats_from_params(state.theta);
  const double floor_mass = state.region.base().weight_floor();
  for (int attempt = 0; attempt < kMaxResetAttempts; ++attempt) {
    const auto rows = draw_batch(data.rows(), batch_size, rng);
    SuffStats s = mean_sbar(data, rows, state.theta);
    for (Index z = 0; z < s.size(); ++z) {
      if (s.s1[z] > kS1Floor && s.s2.col(z).allFinite() && s.s3.col(z).allFinite()) continue;
      const double w = floor_mass / fallback.s1[z];
      s.s1[z] = floor_mass;
      s.s2.col(z) = w * fallback.s2.col(z);
      if (s.s3.rows() > 0) s.s3.col(z) = w * fallback.s3.col(z);
    }
    try {
      return project_to_region(s, state.region);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidInput) throw;
    }
  }
  throw Error(ErrorCode::kUnrecoverableTruncation,
              "no admissible reset statistic after " +
                  std::to_string(kMaxResetAttempts) + " fresh batches");
}

EmState truncated_minibatch_step(const EmState& state, const DataMatrix& data,
                                 std::span<const Index> batch, double gamma,
                                 std::mt19937_64& rng) {
  check_gamma(gamma);
  SuffStats proposal = state.stats;
  proposal.step_toward(mean_sbar(data, batch, state.theta), gamma);
  std::optional<MixtureParams> theta;
  try {
    theta.emplace(theta_bar(proposal));
  } catch (const Error& e) {
    if (!is_domain_failure(e)) throw;
  }
  if (theta && region_contains(*theta, state.region)) {
    return advance(state, std::move(proposal), std::move(*theta));
  }

  SuffStats reset = reset_stat(state, data, static_cast<Index>(batch.size()), rng);
  MixtureParams reset_theta = theta_bar(reset);
  EmState next = advance(state, std::move(reset), std::move(reset_theta));
  next.region.m += 1;
  next.region.events += 1;
  return next;
}

MixtureParams polyak_update(const std::optional<MixtureParams>& average,
                            const MixtureParams& latest, std::int64_t i) {
  if (i < 1) throw Error(ErrorCode::kInvalidInput, "averaging index must be >= 1");
  if (i == 1 || !average) return latest;
  const double k = static_cast<double>(i);
  Vector flat = ((k - 1.0) * average->flatten() + latest.flatten()) / k;
  return MixtureParams::unflatten(latest.spec(), latest.size(), flat);
}

// ---------------------------------------------------------------------------
// Driver

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kBatchEm: return "batch-em";
    case Algorithm::kMiniBatch: return "minibatch";
    case Algorithm::kTruncatedMiniBatch: return "minibatch-truncated";
  }
  return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "batch-em") return Algorithm::kBatchEm;
  if (name == "minibatch") return Algorithm::kMiniBatch;
  if (name == "minibatch-truncated") return Algorithm::kTruncatedMiniBatch;
  throw Error(ErrorCode::kInvalidInput,
              "unknown algorithm '" + std::string(name) + "'");
}

std::int64_t iterations_per_epoch(Index n, Index batch_size) {
  return (n + batch_size - 1) / batch_size;
}

RunRecord run(const DataMatrix& data, const RunConfig& config,
              const MixtureParams& init, std::mt19937_64& rng) {
  const Index n = data.rows();
  if (n < 1) throw Error(ErrorCode::kInvalidInput, "no data");
  if (data.cols() != init.dim()) {
    throw Error(ErrorCode::kInvalidInput, "data dimension mismatch");
  }
  if (config.epochs < 1) throw Error(ErrorCode::kInvalidInput, "epochs must be >= 1");

  const auto wall_start = std::chrono::steady_clock::now();
  const double cpu_start = thread_cpu_seconds();

  RunRecord rec{init, std::nullopt, {}, {}, 0, 0, 0, 0, 0.0, 0.0};
  rec.trace.push_back(TracePoint{0, init, std::nullopt, 0});

  if (config.algorithm == Algorithm::kBatchEm) {
    MixtureParams theta = init;
    std::optional<MixtureParams> average;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      const std::int64_t r = rec.iterations + 1;
      try {
        theta = batch_em_step(data, theta);
      } catch (const Error& e) {
        throw IterationError(e, r);
      }
      rec.iterations = r;
      rec.points_visited += n;
      if (config.polyak) average = polyak_update(average, theta, r);
      if (config.keep_iterates) rec.iterates.push_back(theta);
      rec.trace.push_back(TracePoint{r, theta, average, 0});
    }
    rec.theta = theta;
    rec.polyak = average;
  } else {
    const Index batch_size = config.batch_size;
    if (batch_size < 1 || batch_size > n) {
      throw Error(ErrorCode::kInvalidInput, "batch size must lie in [1, n]");
    }
    config.lr.validate();
    const bool truncated = config.algorithm == Algorithm::kTruncatedMiniBatch;
    TruncationRegion region = config.truncation;
    region.m = 0;
    region.events = 0;

    const auto first = draw_batch(n, batch_size, rng);
    rec.points_visited += batch_size;
    EmState state = make_state(init_suffstats(data, first, init), init, region,
                               config.polyak);

    const std::int64_t per_epoch = iterations_per_epoch(n, batch_size);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      for (std::int64_t k = 0; k < per_epoch; ++k) {
        const auto rows = draw_batch(n, batch_size, rng);
        const double gamma = config.lr(state.iteration + 1);
        try {
          state = truncated
                      ? truncated_minibatch_step(state, data, rows, gamma, rng)
                      : minibatch_step(state, data, rows, gamma);
        } catch (const Error& e) {
          throw IterationError(e, state.iteration + 1);
        }
        rec.points_visited += batch_size;
        if (config.keep_iterates) rec.iterates.push_back(state.theta);
      }
      rec.trace.push_back(
          TracePoint{state.iteration, state.theta, state.polyak, state.region.m});
    }
    rec.iterations = state.iteration;
    rec.theta = state.theta;
    rec.polyak = state.polyak;
    rec.truncation_events = state.region.events;
    rec.truncation_level = state.region.m;
  }

  rec.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - wall_start)
                         .count();
  rec.cpu_seconds = thread_cpu_seconds() - cpu_start;
  return rec;
}

}  // namespace mbem
