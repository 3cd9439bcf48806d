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

#include "mbem/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mbem/error.hpp"

namespace mbem {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kWeightSumTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;

Family family_of(const ComponentParams& c) {
  return static_cast<Family>(c.index());
}

void check_gaussian(const GaussianComponent& c, Index d) {
  if (c.mean.size() != d || c.covariance.rows() != d ||
      c.covariance.cols() != d) {
    throw Error(ErrorCode::kInvalidInput, "gaussian component shape mismatch");
  }
  if (!c.mean.allFinite() || !c.covariance.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, "non-finite gaussian parameters");
  }
  if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() >
      kSymmetryTol) {
    throw Error(ErrorCode::kInvalidInput, "covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(c.covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateCovariance,
                "covariance is not positive definite");
  }
}

void check_rate(double rate) {
  if (!std::isfinite(rate) || rate <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, "rate must be finite and positive");
  }
}

// Thread-local scratch for per-point buffers so evaluator calls do not
// allocate inside hot loops.
std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::kGaussian: return "gaussian";
    case Family::kExponential: return "exponential";
    case Family::kPoisson: return "poisson";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "gaussian" || name == "normal") return Family::kGaussian;
  if (name == "exponential") return Family::kExponential;
  if (name == "poisson") return Family::kPoisson;
  throw Error(ErrorCode::kInvalidInput,
              "unknown family '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// MixtureParams

MixtureParams::MixtureParams(Vector weights,
                             std::vector<ComponentParams> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  const Index g = weights_.size();
  if (g < 1) throw Error(ErrorCode::kInvalidInput, "mixture needs g >= 1");
  if (static_cast<Index>(components_.size()) != g) {
    throw Error(ErrorCode::kInvalidInput,
                "weights and components differ in length");
  }
  double total = 0.0;
  for (Index z = 0; z < g; ++z) {
    if (!std::isfinite(weights_[z]) || weights_[z] <= 0.0) {
      throw Error(ErrorCode::kInvalidInput, "weights must be positive");
    }
    total += weights_[z];
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    throw Error(ErrorCode::kInvalidInput, "weights must sum to one");
  }

  spec_.family = family_of(components_.front());
  spec_.dim = spec_.family == Family::kGaussian
                  ? std::get<GaussianComponent>(components_.front()).mean.size()
                  : 1;
  if (spec_.dim < 1) throw Error(ErrorCode::kInvalidInput, "dimension < 1");
  for (const auto& c : components_) {
    if (family_of(c) != spec_.family) {
      throw Error(ErrorCode::kInvalidInput, "components mix families");
    }
    switch (spec_.family) {
      case Family::kGaussian:
        check_gaussian(std::get<GaussianComponent>(c), spec_.dim);
        break;
      case Family::kExponential:
        check_rate(std::get<ExponentialComponent>(c).rate);
        break;
      case Family::kPoisson:
        check_rate(std::get<PoissonComponent>(c).rate);
        break;
    }
  }
}

const GaussianComponent& MixtureParams::gaussian(Index z) const {
  return std::get<GaussianComponent>(components_.at(z));
}

double MixtureParams::rate(Index z) const {
  const auto& c = components_.at(z);
  if (const auto* e = std::get_if<ExponentialComponent>(&c)) return e->rate;
  if (const auto* p = std::get_if<PoissonComponent>(&c)) return p->rate;
  throw Error(ErrorCode::kInvalidInput, "gaussian component has no rate");
}

Vector MixtureParams::flatten_component(Index z) const {
  if (spec_.family != Family::kGaussian) {
    Vector out(1);
    out[0] = rate(z);
    return out;
  }
  const auto& c = gaussian(z);
  const Index d = spec_.dim;
  Vector out(d + d * d);
  out.head(d) = c.mean;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) out[d + i * d + j] = c.covariance(i, j);
  return out;
}

Vector MixtureParams::flatten() const {
  const Index g = size();
  const Index per = spec_.family == Family::kGaussian
                        ? spec_.dim + spec_.dim * spec_.dim
                        : 1;
  Vector out(g + g * per);
  out.head(g) = weights_;
  for (Index z = 0; z < g; ++z) out.segment(g + z * per, per) = flatten_component(z);
  return out;
}

MixtureParams MixtureParams::unflatten(const FamilySpec& spec, Index g,
                                       const Vector& flat) {
  const Index d = spec.dim;
  const Index per = spec.family == Family::kGaussian ? d + d * d : 1;
  if (flat.size() != g + g * per) {
    throw Error(ErrorCode::kInvalidInput, "flat parameter length mismatch");
  }
  std::vector<ComponentParams> comps;
  comps.reserve(g);
  for (Index z = 0; z < g; ++z) {
    const auto seg = flat.segment(g + z * per, per);
    switch (spec.family) {
      case Family::kGaussian: {
        GaussianComponent c{seg.head(d), Matrix(d, d)};
        for (Index i = 0; i < d; ++i)
          for (Index j = 0; j < d; ++j) c.covariance(i, j) = seg[d + i * d + j];
        comps.emplace_back(std::move(c));
        break;
      }
      case Family::kExponential:
        comps.emplace_back(ExponentialComponent{seg[0]});
        break;
      case Family::kPoisson:
        comps.emplace_back(PoissonComponent{seg[0]});
        break;
    }
  }
  return MixtureParams(flat.head(g), std::move(comps));
}

// ---------------------------------------------------------------------------
// SuffStats

SuffStats SuffStats::zeros(const FamilySpec& spec, Index g) {
  SuffStats s;
  s.spec = spec;
  s.s1 = Vector::Zero(g);
  if (spec.family == Family::kGaussian) {
    s.s2 = Matrix::Zero(spec.dim, g);
    s.s3 = Matrix::Zero(packed_size(spec.dim), g);
  } else {
    s.s2 = Matrix::Zero(1, g);
    s.s3 = Matrix::Zero(0, g);
  }
  return s;
}

Matrix SuffStats::second_moment(Index z) const {
  return unpack_symmetric(s3.col(z), spec.dim);
}

void SuffStats::step_toward(const SuffStats& target, double gamma) {
  s1 += gamma * (target.s1 - s1);
  s2 += gamma * (target.s2 - s2);
  s3 += gamma * (target.s3 - s3);
}

void SuffStats::add_scaled(const SuffStats& other, double w) {
  s1 += w * other.s1;
  s2 += w * other.s2;
  s3 += w * other.s3;
}

void SuffStats::scale(double w) {
  s1 *= w;
  s2 *= w;
  s3 *= w;
}

// ---------------------------------------------------------------------------
// MixtureEvaluator

MixtureEvaluator::MixtureEvaluator(const MixtureParams& theta)
    : spec_(theta.spec()), log_weights_(theta.weights().array().log()) {
  const Index g = theta.size();
  const Index d = spec_.dim;
  if (spec_.family == Family::kGaussian) {
    gaussians_.reserve(g);
    for (Index z = 0; z < g; ++z) {
      const auto& c = theta.gaussian(z);
      Eigen::LLT<Matrix> llt(c.covariance);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::kNumericDomain, "singular covariance");
      }
      Matrix lower = llt.matrixL();
      // Store L^{-1}, so the Mahalanobis term is a triangular mat-vec.
      Matrix inv = lower.triangularView<Eigen::Lower>().solve(
          Matrix::Identity(d, d));
      double log_det = 2.0 * lower.diagonal().array().log().sum();
      if (!std::isfinite(log_det)) {
        throw Error(ErrorCode::kNumericDomain, "singular covariance");
      }
      gaussians_.push_back(CachedGaussian{
          c.mean, std::move(inv),
          -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
                  log_det)});
    }
  } else {
    rates_.resize(g);
    for (Index z = 0; z < g; ++z) rates_[z] = theta.rate(z);
    log_rates_ = rates_.array().log();
  }
}

double MixtureEvaluator::component_log_density(Index z,
                                               std::span<const double> y) const {
  switch (spec_.family) {
    case Family::kGaussian: {
      const auto& c = gaussians_[z];
      const Index d = spec_.dim;
      const double* mu = c.mean.data();
      double quad = 0.0;
      for (Index i = 0; i < d; ++i) {
        double acc = 0.0;
        for (Index j = 0; j <= i; ++j) acc += c.chol_lower(i, j) * (y[j] - mu[j]);
        quad += acc * acc;
      }
      return c.log_norm - 0.5 * quad;
    }
    case Family::kExponential:
      if (y[0] < 0.0) return kNegInf;
      return log_rates_[z] - rates_[z] * y[0];
    case Family::kPoisson:
      return y[0] * log_rates_[z] - rates_[z] - std::lgamma(y[0] + 1.0);
  }
  return kNegInf;
}

void MixtureEvaluator::log_joint(std::span<const double> y,
                                 std::span<double> out) const {
  if (static_cast<Index>(y.size()) != spec_.dim) {
    throw Error(ErrorCode::kInvalidInput, "observation dimension mismatch");
  }
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidInput, "non-finite observation");
    }
  }
  if (spec_.family == Family::kPoisson &&
      (y[0] < 0.0 || std::floor(y[0]) != y[0])) {
    throw Error(ErrorCode::kInvalidInput,
                "poisson observation must be a non-negative integer");
  }
  for (Index z = 0; z < size(); ++z) {
    out[z] = log_weights_[z] + component_log_density(z, y);
  }
}

double MixtureEvaluator::responsibilities(std::span<const double> y,
                                          std::span<double> tau) const {
  log_joint(y, tau);
  const Index g = size();
  const double top = *std::max_element(tau.begin(), tau.begin() + g);
  if (top == kNegInf) {
    throw Error(ErrorCode::kDegeneratePoint,
                "observation has zero density under every component");
  }
  double total = 0.0;
  for (Index z = 0; z < g; ++z) {
    tau[z] = std::exp(tau[z] - top);
    total += tau[z];
  }
  for (Index z = 0; z < g; ++z) tau[z] /= total;
  return top + std::log(total);
}

double MixtureEvaluator::log_density(std::span<const double> y) const {
  auto& buf = scratch(static_cast<std::size_t>(size()));
  log_joint(y, buf);
  const Index g = size();
  const double top = *std::max_element(buf.begin(), buf.begin() + g);
  if (top == kNegInf) return kNegInf;
  double total = 0.0;
  for (Index z = 0; z < g; ++z) total += std::exp(buf[z] - top);
  return top + std::log(total);
}

void MixtureEvaluator::accumulate_sbar(std::span<const double> y, double weight,
                                       SuffStats& stats) const {
  const Index g = size();
  auto& tau = scratch(static_cast<std::size_t>(g));
  responsibilities(y, tau);
  const Index d = spec_.dim;
  for (Index z = 0; z < g; ++z) {
    const double w = weight * tau[z];
    stats.s1[z] += w;
    double* s2 = stats.s2.col(z).data();
    for (Index i = 0; i < d; ++i) s2[i] += w * y[i];
    if (spec_.family == Family::kGaussian) {
      double* s3 = stats.s3.col(z).data();
      Index k = 0;
      for (Index i = 0; i < d; ++i) {
        const double wy = w * y[i];
        for (Index j = i; j < d; ++j) s3[k++] += wy * y[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Free functions

double log_density(const Vector& y, const MixtureParams& theta) {
  MixtureEvaluator eval(theta);
  const double v = eval.log_density({y.data(), static_cast<std::size_t>(y.size())});
  return v;
}

Vector responsibilities(const Vector& y, const MixtureParams& theta) {
  MixtureEvaluator eval(theta);
  Vector tau(theta.size());
  eval.responsibilities({y.data(), static_cast<std::size_t>(y.size())},
                        {tau.data(), static_cast<std::size_t>(tau.size())});
  return tau;
}

SuffStats sbar(const Vector& y, const MixtureParams& theta) {
  MixtureEvaluator eval(theta);
  SuffStats s = SuffStats::zeros(theta.spec(), theta.size());
  eval.accumulate_sbar({y.data(), static_cast<std::size_t>(y.size())}, 1.0, s);
  return s;
}

MixtureParams theta_bar(const SuffStats& s) {
  const Index g = s.size();
  const Index d = s.spec.dim;
  double total = 0.0;
  for (Index z = 0; z < g; ++z) {
    if (!(s.s1[z] > kS1Floor)) {
      throw Error(ErrorCode::kEmptyComponent,
                  "component " + std::to_string(z) + " has weight mass " +
                      std::to_string(s.s1[z]));
    }
    total += s.s1[z];
  }
  Vector weights = s.s1 / total;

  std::vector<ComponentParams> comps;
  comps.reserve(g);
  for (Index z = 0; z < g; ++z) {
    const double mass = s.s1[z];
    switch (s.spec.family) {
      case Family::kGaussian: {
        Vector mean = s.s2.col(z) / mass;
        Matrix cov(d, d);
        Index k = 0;
        for (Index i = 0; i < d; ++i)
          for (Index j = i; j < d; ++j) {
            const double v = s.s3(k++, z) / mass - mean[i] * mean[j];
            cov(i, j) = v;
            cov(j, i) = v;
          }
        if (!cov.allFinite() || !mean.allFinite()) {
          throw Error(ErrorCode::kNumericDomain, "non-finite statistics");
        }
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) {
          throw Error(ErrorCode::kDegenerateCovariance,
                      "component " + std::to_string(z) +
                          " scatter is not positive definite");
        }
        comps.emplace_back(GaussianComponent{std::move(mean), std::move(cov)});
        break;
      }
      case Family::kExponential: {
        const double rate = mass / s.s2(0, z);
        if (!std::isfinite(rate) || rate <= 0.0) {
          throw Error(ErrorCode::kNumericDomain,
                      "exponential rate undefined for component " +
                          std::to_string(z));
        }
        comps.emplace_back(ExponentialComponent{rate});
        break;
      }
      case Family::kPoisson: {
        const double rate = s.s2(0, z) / mass;
        if (!std::isfinite(rate) || rate <= 0.0) {
          throw Error(ErrorCode::kNumericDomain,
                      "poisson rate undefined for component " +
                          std::to_string(z));
        }
        comps.emplace_back(PoissonComponent{rate});
        break;
      }
    }
  }
  return MixtureParams(std::move(weights), std::move(comps));
}

MixtureParams theta_bar(const SuffStats& s, const FamilySpec& family) {
  if (!(s.spec == family)) {
    throw Error(ErrorCode::kInvalidInput, "statistics belong to another family");
  }
  return theta_bar(s);
}

SuffStats stats_from_params(const MixtureParams& theta) {
  const Index g = theta.size();
  SuffStats s = SuffStats::zeros(theta.spec(), g);
  for (Index z = 0; z < g; ++z) {
    const double pi = theta.weights()[z];
    s.s1[z] = pi;
    switch (theta.family()) {
      case Family::kGaussian: {
        const auto& c = theta.gaussian(z);
        s.s2.col(z) = pi * c.mean;
        Matrix second = c.covariance + c.mean * c.mean.transpose();
        s.s3.col(z) = pi * pack_symmetric(second);
        break;
      }
      case Family::kExponential:
        s.s2(0, z) = pi / theta.rate(z);
        break;
      case Family::kPoisson:
        s.s2(0, z) = pi * theta.rate(z);
        break;
    }
  }
  return s;
}

LabeledSample sample(const MixtureParams& theta, Index n, std::mt19937_64& rng) {
  if (n < 1) throw Error(ErrorCode::kInvalidInput, "sample size must be >= 1");
  const Index g = theta.size();
  const Index d = theta.dim();
  std::discrete_distribution<int> pick(theta.weights().data(),
                                       theta.weights().data() + g);
  std::vector<Matrix> chol;
  if (theta.family() == Family::kGaussian) {
    for (Index z = 0; z < g; ++z) {
      chol.emplace_back(Eigen::LLT<Matrix>(theta.gaussian(z).covariance).matrixL());
    }
  }

  LabeledSample out{DataMatrix(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector noise(d);
  for (Index i = 0; i < n; ++i) {
    const int z = pick(rng);
    out.labels[static_cast<std::size_t>(i)] = z;
    switch (theta.family()) {
      case Family::kGaussian: {
        for (Index j = 0; j < d; ++j) noise[j] = normal(rng);
        out.data.row(i) =
            (theta.gaussian(z).mean + chol[static_cast<std::size_t>(z)] * noise)
                .transpose();
        break;
      }
      case Family::kExponential: {
        std::exponential_distribution<double> draw(theta.rate(z));
        out.data(i, 0) = draw(rng);
        break;
      }
      case Family::kPoisson: {
        std::poisson_distribution<long long> draw(theta.rate(z));
        out.data(i, 0) = static_cast<double>(draw(rng));
        break;
      }
    }
  }
  return out;
}

}  // namespace mbem
