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

// Finite mixtures of exponential-family components.
//
// The estimation algorithms only ever touch a family through two maps: the
// conditional expectation of the complete-data sufficient statistic given an
// observation (sbar) and the maximizer of the statistic-linear complete-data
// objective (theta_bar). Natural parameters, log-partition functions and base
// measures are never materialized.
//
// Three component families are provided:
//   Gaussian     y in R^d,   stats (tau, tau*y, tau*y*y^T)
//   Exponential  y > 0,      stats (tau, tau*y),  rate = s1 / s2
//   Poisson      y in N,     stats (tau, tau*y),  rate = s2 / s1
//
// All mixture-level quantities are evaluated in log space with log-sum-exp.

#ifndef MBEM_MIXTURE_HPP_
#define MBEM_MIXTURE_HPP_

#include <random>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "mbem/linalg.hpp"

namespace mbem {

enum class Family { kGaussian, kExponential, kPoisson };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

// Below this weight mass a component is treated as empty.
inline constexpr double kS1Floor = 1e-12;

struct GaussianComponent {
  Vector mean;
  Matrix covariance;
};

struct ExponentialComponent {
  double rate = 1.0;
};

struct PoissonComponent {
  double rate = 1.0;
};

using ComponentParams =
    std::variant<GaussianComponent, ExponentialComponent, PoissonComponent>;

struct FamilySpec {
  Family family = Family::kGaussian;
  Index dim = 1;

  bool operator==(const FamilySpec&) const = default;
};

// Mixing proportions plus per-component parameters. The constructor enforces
// the invariants (positive weights summing to one, a single family, valid
// component parameters), so every MixtureParams value in circulation is valid.
class MixtureParams {
 public:
  MixtureParams(Vector weights, std::vector<ComponentParams> components);

  Index size() const { return weights_.size(); }
  Index dim() const { return spec_.dim; }
  Family family() const { return spec_.family; }
  const FamilySpec& spec() const { return spec_; }

  const Vector& weights() const { return weights_; }
  const std::vector<ComponentParams>& components() const { return components_; }

  const GaussianComponent& gaussian(Index z) const;
  double rate(Index z) const;

  // (weights, then per component: mean and full covariance row-major, or the
  // rate). This is the layout used by Polyak averaging and squared error.
  Vector flatten() const;
  Vector flatten_component(Index z) const;
  static MixtureParams unflatten(const FamilySpec& spec, Index g,
                                 const Vector& flat);

 private:
  Vector weights_;
  std::vector<ComponentParams> components_;
  FamilySpec spec_;
};

// Per-component sufficient statistics stored column-wise:
//   s1(z)         weight mass
//   s2.col(z)     first moment (length d; length 1 for count families)
//   s3.col(z)     packed second moment (d(d+1)/2 rows; Gaussian only)
struct SuffStats {
  FamilySpec spec;
  Vector s1;
  Matrix s2;
  Matrix s3;

  static SuffStats zeros(const FamilySpec& spec, Index g);

  Index size() const { return s1.size(); }
  Matrix second_moment(Index z) const;

  // this += gamma * (target - this)
  void step_toward(const SuffStats& target, double gamma);
  void add_scaled(const SuffStats& other, double w);
  void scale(double w);
};

// Log-space evaluator with per-component factorizations cached, for use in
// loops over many observations at a fixed parameter value.
class MixtureEvaluator {
 public:
  explicit MixtureEvaluator(const MixtureParams& theta);

  Index size() const { return log_weights_.size(); }
  Index dim() const { return spec_.dim; }

  // out[z] = log pi_z + log f(y; omega_z)
  void log_joint(std::span<const double> y, std::span<double> out) const;
  double log_density(std::span<const double> y) const;
  // Fills tau (length g) and returns log f(y; theta).
  double responsibilities(std::span<const double> y, std::span<double> tau) const;
  // stats += weight * sbar(y; theta)
  void accumulate_sbar(std::span<const double> y, double weight,
                       SuffStats& stats) const;

 private:
  struct CachedGaussian {
    Vector mean;
    Matrix chol_lower;
    double log_norm = 0.0;  // -0.5 * (d log 2pi + log det Sigma)
  };

  double component_log_density(Index z, std::span<const double> y) const;

  FamilySpec spec_;
  Vector log_weights_;
  std::vector<CachedGaussian> gaussians_;
  Vector rates_;
  Vector log_rates_;
};

double log_density(const Vector& y, const MixtureParams& theta);
Vector responsibilities(const Vector& y, const MixtureParams& theta);
SuffStats sbar(const Vector& y, const MixtureParams& theta);

// M-step map. Throws kEmptyComponent when some s1 <= kS1Floor,
// kDegenerateCovariance when a Gaussian scatter is not positive definite and
// kNumericDomain when a count-family rate is not finite and positive.
MixtureParams theta_bar(const SuffStats& s);
MixtureParams theta_bar(const SuffStats& s, const FamilySpec& family);

// Inverse of theta_bar on statistics normalized to sum(s1) = 1.
SuffStats stats_from_params(const MixtureParams& theta);

struct LabeledSample {
  DataMatrix data;
  std::vector<int> labels;  // zero-based component ids
};

LabeledSample sample(const MixtureParams& theta, Index n, std::mt19937_64& rng);

inline std::span<const double> row_span(const DataMatrix& data, Index i) {
  return {data.data() + i * data.cols(), static_cast<std::size_t>(data.cols())};
}

}  // namespace mbem

#endif  // MBEM_MIXTURE_HPP_
