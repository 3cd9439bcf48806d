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

#include "mbem/preprocess.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mbem/error.hpp"

namespace mbem {
namespace {

constexpr Index kBlockRows = 4096;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t line_no) {
  const double v = parse_double(s, line_no);
  if (std::floor(v) != v || std::abs(v) > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": class is not an integer: '" + s + "'");
  }
  return static_cast<int>(v);
}

double squared_distance(std::span<const double> y, const Matrix& centers, Index c) {
  double acc = 0.0;
  for (Index j = 0; j < centers.rows(); ++j) {
    const double diff = y[static_cast<std::size_t>(j)] - centers(j, c);
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------

ReducedColumns drop_constant_columns(const DataMatrix& data) {
  if (data.rows() < 1) throw Error(ErrorCode::kInvalidInput, "no data");
  ReducedColumns out;
  for (Index j = 0; j < data.cols(); ++j) {
    const double first = data(0, j);
    bool constant = true;
    for (Index i = 1; i < data.rows() && constant; ++i) constant = data(i, j) == first;
    if (!constant) out.kept.push_back(j);
  }
  out.data.resize(data.rows(), static_cast<Index>(out.kept.size()));
  for (Index k = 0; k < static_cast<Index>(out.kept.size()); ++k) {
    out.data.col(k) = data.col(out.kept[static_cast<std::size_t>(k)]);
  }
  return out;
}

// ---------------------------------------------------------------------------

PcaModel fit_pca(const DataMatrix& data, Index components) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (components < 1 || components > d || d > n) {
    throw Error(ErrorCode::kInvalidInput, "need 1 <= components <= d <= n");
  }
  if (n < 2) throw Error(ErrorCode::kInvalidInput, "PCA needs n >= 2");
  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  Matrix cov = Matrix::Zero(d, d);
  for (Index start = 0; start < n; start += kBlockRows) {
    const Index rows = std::min(kBlockRows, n - start);
    const Matrix block = data.middleRows(start, rows).rowwise() - model.mean.transpose();
    cov.noalias() += block.transpose() * block;
  }
  cov /= static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericDomain, "eigendecomposition failed");
  }
  model.components.resize(d, components);
  model.eigenvalues.resize(components);
  for (Index k = 0; k < components; ++k) {
    const Index src = d - 1 - k;  // eigenvalues come back ascending
    model.eigenvalues[k] = std::max(0.0, eig.eigenvalues()[src]);
    Vector axis = eig.eigenvectors().col(src);
    Index top = 0;
    axis.cwiseAbs().maxCoeff(&top);
    if (axis[top] < 0.0) axis = -axis;
    model.components.col(k) = axis;
  }
  return model;
}

DataMatrix project(const PcaModel& model, const DataMatrix& data) {
  if (data.cols() != model.mean.size()) {
    throw Error(ErrorCode::kInvalidInput, "PCA input dimension mismatch");
  }
  const Index n = data.rows();
  DataMatrix out(n, model.components.cols());
  for (Index start = 0; start < n; start += kBlockRows) {
    const Index rows = std::min(kBlockRows, n - start);
    const Matrix block = data.middleRows(start, rows).rowwise() - model.mean.transpose();
    out.middleRows(start, rows).noalias() = block * model.components;
  }
  return out;
}

// ---------------------------------------------------------------------------

MixtureParams params_from_labels(const DataMatrix& data, const LabelVector& labels,
                                 Index g, Family family) {
  if (static_cast<Index>(labels.size()) != data.rows()) {
    throw Error(ErrorCode::kInvalidInput, "label count does not match data");
  }
  const FamilySpec spec{family, family == Family::kGaussian ? data.cols() : 1};
  if (data.cols() != spec.dim) {
    throw Error(ErrorCode::kInvalidInput, "count families need one column");
  }
  SuffStats s = SuffStats::zeros(spec, g);
  for (Index i = 0; i < data.rows(); ++i) {
    const int z = labels[static_cast<std::size_t>(i)];
    if (z < 0 || z >= g) throw Error(ErrorCode::kInvalidInput, "label out of range");
    s.s1[z] += 1.0;
    s.s2.col(z) += data.row(i).transpose();
    if (family == Family::kGaussian) {
      Vector col = s.s3.col(z);
      add_outer_packed(col, data.row(i).transpose(), 1.0);
      s.s3.col(z) = col;
    }
  }
  s.scale(1.0 / static_cast<double>(data.rows()));
  return theta_bar(s);
}

PartitionInit random_partition_init(const DataMatrix& data, Index g,
                                    std::mt19937_64& rng, Family family) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (g < 1) throw Error(ErrorCode::kInvalidInput, "g must be >= 1");
  if (n < g * (d + 2)) {
    throw Error(ErrorCode::kInvalidInput,
                "random partition needs n >= g (d + 2) observations");
  }
  const Index min_block = family == Family::kGaussian ? d + 1 : 1;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g) - 1);
  for (int attempt = 1; attempt <= kMaxPartitionAttempts; ++attempt) {
    LabelVector labels(static_cast<std::size_t>(n));
    std::vector<Index> counts(static_cast<std::size_t>(g), 0);
    for (auto& z : labels) {
      z = pick(rng);
      ++counts[static_cast<std::size_t>(z)];
    }
    if (*std::min_element(counts.begin(), counts.end()) < min_block) continue;
    try {
      return PartitionInit{params_from_labels(data, labels, g, family),
                           std::move(labels), attempt};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidInput) throw;
    }
  }
  throw Error(ErrorCode::kInitializationFailure,
              "no admissible random partition in " +
                  std::to_string(kMaxPartitionAttempts) + " attempts");
}

// ---------------------------------------------------------------------------

KMeansResult kmeans(const DataMatrix& data, Index g, int max_sweeps,
                    const LabelVector& init_labels) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (g < 1 || g > n) throw Error(ErrorCode::kInvalidInput, "need 1 <= g <= n");
  if (static_cast<Index>(init_labels.size()) != n) {
    throw Error(ErrorCode::kInvalidInput, "label count does not match data");
  }
  if (max_sweeps < 0) throw Error(ErrorCode::kInvalidInput, "sweeps must be >= 0");

  KMeansResult res;
  res.labels = init_labels;
  res.centers = Matrix::Zero(d, g);
  std::vector<Index> counts(static_cast<std::size_t>(g), 0);

  auto recompute_centers = [&] {
    res.centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const int z = res.labels[static_cast<std::size_t>(i)];
      res.centers.col(z) += data.row(i).transpose();
      ++counts[static_cast<std::size_t>(z)];
    }
    for (Index z = 0; z < g; ++z) {
      if (counts[static_cast<std::size_t>(z)] > 0) {
        res.centers.col(z) /= static_cast<double>(counts[static_cast<std::size_t>(z)]);
      }
    }
  };

  // Moves the point farthest from its own center into each empty cluster.
  auto reseed_empty = [&] {
    for (Index c = 0; c < g; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      double far_dist = -1.0;
      for (Index i = 0; i < n; ++i) {
        const int z = res.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(z)] < 2) continue;
        const double dist = squared_distance(row_span(data, i), res.centers, z);
        if (dist > far_dist) {
          far_dist = dist;
          far = i;
        }
      }
      if (far < 0) break;  // unreachable while g <= n
      res.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      recompute_centers();
    }
  };

  auto total_wcss = [&] {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      acc += squared_distance(row_span(data, i), res.centers,
                              res.labels[static_cast<std::size_t>(i)]);
    }
    return acc;
  };

  for (int z : init_labels) {
    if (z < 0 || z >= g) throw Error(ErrorCode::kInvalidInput, "label out of range");
  }
  recompute_centers();
  reseed_empty();
  res.wcss.push_back(total_wcss());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const auto y = row_span(data, i);
      Index best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < g; ++c) {
        const double dist = squared_distance(y, res.centers, c);
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      auto& label = res.labels[static_cast<std::size_t>(i)];
      if (label != static_cast<int>(best)) {
        label = static_cast<int>(best);
        changed = true;
      }
    }
    recompute_centers();
    reseed_empty();
    ++res.sweeps;
    res.wcss.push_back(total_wcss());
    if (!changed) break;
  }
  return res;
}

// ---------------------------------------------------------------------------

LabeledData parse_labeled_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  LabeledData out;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (out.header.empty()) {
      if (cells.size() < 2) {
        throw Error(ErrorCode::kParse, "header needs a feature and a class column");
      }
      out.header = std::move(cells);
      continue;
    }
    if (cells.size() != out.header.size()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(out.header.size()) + " fields");
    }
    std::vector<double> row;
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) row.push_back(parse_double(cells[k], line_no));
    rows.push_back(std::move(row));
    out.labels.push_back(parse_int(cells.back(), line_no));
  }
  if (rows.empty()) throw Error(ErrorCode::kParse, "no data rows");
  const Index d = static_cast<Index>(out.header.size() - 1);
  out.features.resize(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < out.features.rows(); ++i)
    for (Index j = 0; j < d; ++j)
      out.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

LabeledData read_labeled_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_labeled_csv(ss.str());
}

MixtureParams fit_class_template(const LabeledData& data) {
  std::map<int, std::vector<Index>> classes;
  for (Index i = 0; i < static_cast<Index>(data.labels.size()); ++i) {
    classes[data.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  const Index d = data.features.cols();
  const auto g = static_cast<Index>(classes.size());
  std::vector<ComponentParams> comps;
  for (const auto& [label, rows] : classes) {
    const auto m = static_cast<Index>(rows.size());
    if (m < d + 1) {
      throw Error(ErrorCode::kInvalidInput,
                  "class " + std::to_string(label) + " has too few rows for a covariance");
    }
    Matrix block(m, d);
    for (Index k = 0; k < m; ++k) block.row(k) = data.features.row(rows[static_cast<std::size_t>(k)]);
    Vector mean = block.colwise().mean().transpose();
    const Matrix centered = block.rowwise() - mean.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(m - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    comps.emplace_back(GaussianComponent{std::move(mean), std::move(cov)});
  }
  return MixtureParams(Vector::Constant(g, 1.0 / static_cast<double>(g)), std::move(comps));
}

}  // namespace mbem
