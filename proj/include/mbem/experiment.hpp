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

// Experiment grid: repetitions x algorithm variants, with one shared random
// partition initialization per repetition and deterministic per-run seeds.

#ifndef MBEM_EXPERIMENT_HPP_
#define MBEM_EXPERIMENT_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbem/em.hpp"
#include "mbem/metrics.hpp"
#include "mbem/mixture.hpp"

namespace mbem {

inline constexpr const char* kResultsSchema = "mbem.results/1";

enum class DataSource { kTemplateCsv, kThetaFile, kIdxPca };

// Variant names: "batch-em", "minibatch", "minibatch-truncated", each with an
// optional "+polyak" suffix, plus "kmeans" (baseline). Mini-batch entries are
// expanded over every batch fraction.
struct ExperimentSpec {
  DataSource source = DataSource::kTemplateCsv;
  std::string template_csv;
  std::string theta_file;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  Index pca_components = 10;

  Index n = 100000;  // simulated sample size (ignored for IDX data)
  Index g = 0;       // 0: take from the template
  std::vector<std::string> variants = {"batch-em", "minibatch", "minibatch+polyak",
                                       "minibatch-truncated",
                                       "minibatch-truncated+polyak"};
  std::vector<double> batch_fractions = {0.1, 0.2};
  LearningRate lr;
  TruncationRegion truncation;
  int epochs = 10;
  int repetitions = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  bool per_observation_loglik = false;
  bool root_se = false;

  void validate() const;
};

struct VariantSpec {
  std::string id;  // e.g. "minibatch-truncated+polyak@0.1"
  bool kmeans = false;
  Algorithm algorithm = Algorithm::kBatchEm;
  double batch_fraction = 1.0;
  bool polyak = false;
};

std::vector<VariantSpec> resolve_variants(const ExperimentSpec& spec);

// One data set for one repetition. `truth` is known for simulated data only.
struct Workload {
  DataMatrix data;
  LabelVector labels;
  std::optional<MixtureParams> truth;
};

// Where a repetition's data comes from: a generative template (fresh sample
// per repetition) or a fixed data set shared by every repetition.
struct Problem {
  std::optional<MixtureParams> generator;
  std::shared_ptr<const Workload> fixed;
  Index g = 0;
};

Problem load_problem(const ExperimentSpec& spec);

struct ResultRow {
  std::string variant;
  int repetition = 0;
  std::uint64_t seed = 0;
  Index batch_size = 0;
  bool ok = true;
  std::int64_t iterations = 0;
  std::int64_t points_visited = 0;
  std::int64_t truncations = 0;
  double loglik = 0.0;
  double se = 0.0;
  double ari = 0.0;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
  std::string error;

  MetricReport report() const { return {loglik, se, ari, wall_seconds}; }
};

struct ResultsTable {
  std::vector<ResultRow> rows;  // ordered by (variant, repetition)
};

// Stream ids for derive_seed.
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kInitStream = 2;
inline constexpr std::uint64_t kSamplingStreamBase = std::uint64_t{3} << 32;

std::uint64_t splitmix64(std::uint64_t x);
// splitmix64(splitmix64(splitmix64(master) ^ stream) ^ repetition)
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t repetition);
// Mini-batch sampling streams are keyed by batch size, so variants that
// differ only in averaging or truncation draw identical batches.
std::uint64_t sampling_stream(Index batch_size);

Index batch_size_for(double fraction, Index n);

ResultsTable run_experiment(const ExperimentSpec& spec);
ResultsTable run_grid(const ExperimentSpec& spec, const Problem& problem);

// Per-variant aggregation of every metric column.
struct MetricSummary {
  std::string variant;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double se = 0.0;  // sd / sqrt(count)
};

std::vector<MetricSummary> summarize(const ResultsTable& table);

struct BoxplotRecord {
  std::string variant;
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

// Linear interpolation between order statistics: position h = (n - 1) p.
double quantile(std::vector<double> values, double p);

std::vector<BoxplotRecord> emit_boxplot_data(const ResultsTable& table,
                                             const std::string& metric);

extern const std::vector<std::string> kMetricColumns;
double metric_value(const ResultRow& row, const std::string& metric);

std::string results_csv(const ResultsTable& table, bool include_timing = true);
std::string summary_csv(const std::vector<MetricSummary>& summary);
nlohmann::json summary_json(const std::vector<MetricSummary>& summary);
std::string boxplot_csv(const std::vector<BoxplotRecord>& records,
                        const std::string& metric);
nlohmann::json experiment_metadata(const ExperimentSpec& spec,
                                   const std::string& command);

// results.csv, summary.csv, summary.json, boxplot_<metric>.csv, meta.json.
void write_outputs(const ResultsTable& table, const ExperimentSpec& spec,
                   const std::string& command, const std::string& out_dir);

// Reads the key-value config document; keys mirror the CLI flag names.
ExperimentSpec apply_config(ExperimentSpec spec, const nlohmann::json& config);

}  // namespace mbem

#endif  // MBEM_EXPERIMENT_HPP_
