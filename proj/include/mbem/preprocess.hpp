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

#ifndef MBEM_PREPROCESS_HPP_
#define MBEM_PREPROCESS_HPP_

#include <random>
#include <string>
#include <vector>

#include "mbem/linalg.hpp"
#include "mbem/metrics.hpp"
#include "mbem/mixture.hpp"

namespace mbem {

struct ReducedColumns {
  DataMatrix data;
  std::vector<Index> kept;  // strictly increasing source column indices
};

// Removes every column whose value is identical across all rows.
ReducedColumns drop_constant_columns(const DataMatrix& data);

struct PcaModel {
  Vector mean;
  Matrix components;  // d x k, orthonormal columns
  Vector eigenvalues;  // length k, descending
};

// Principal axes of the (n - 1)-normalized sample covariance of the centered
// data. Each axis is oriented so its largest-magnitude entry is positive.
PcaModel fit_pca(const DataMatrix& data, Index components);
DataMatrix project(const PcaModel& model, const DataMatrix& data);

struct PartitionInit {
  MixtureParams theta;
  LabelVector labels;
  int attempts = 1;
};

inline constexpr int kMaxPartitionAttempts = 100;

// Random-partition initialization: every observation gets an independent
// uniform label in [0, g) and theta is the M-step of the hard assignment.
// Redraws when a block has fewer than d + 1 points or its parameters are
// degenerate; throws kInitializationFailure after kMaxPartitionAttempts.
PartitionInit random_partition_init(const DataMatrix& data, Index g,
                                    std::mt19937_64& rng,
                                    Family family = Family::kGaussian);

// M-step of a hard assignment (labels in [0, g)).
MixtureParams params_from_labels(const DataMatrix& data, const LabelVector& labels,
                                 Index g, Family family = Family::kGaussian);

struct KMeansResult {
  LabelVector labels;
  Matrix centers;              // d x g
  std::vector<double> wcss;    // after initialization, then after each sweep
  int sweeps = 0;
};

// Lloyd iterations from the clustering in `init_labels`, at most `max_sweeps`
// sweeps. An empty cluster is reseeded at the observation farthest from its
// current center.
KMeansResult kmeans(const DataMatrix& data, Index g, int max_sweeps,
                    const LabelVector& init_labels);

struct LabeledData {
  std::vector<std::string> header;
  DataMatrix features;
  LabelVector labels;
};

// CSV with a header row, numeric feature columns and a final integer class
// column.
LabeledData read_labeled_csv(const std::string& path);
LabeledData parse_labeled_csv(const std::string& text);

// One Gaussian per class (mean and (n - 1)-normalized covariance), equal
// mixing proportions. Classes are ordered by label value.
MixtureParams fit_class_template(const LabeledData& data);

}  // namespace mbem

#endif  // MBEM_PREPROCESS_HPP_
