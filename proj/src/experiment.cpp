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

#include "mbem/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "mbem/error.hpp"
#include "mbem/idx.hpp"
#include "mbem/mixture_json.hpp"
#include "mbem/preprocess.hpp"
#include "mbem/version.hpp"

namespace mbem {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kQuantileRule =
    "linear interpolation between order statistics, h = (n - 1) p";
constexpr const char* kSeedRule =
    "splitmix64(splitmix64(splitmix64(master) ^ stream) ^ repetition); "
    "stream 1 = data, 2 = initialization, (3 << 32) | N = mini-batch sampling";

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
}

Workload simulate_workload(const MixtureParams& generator, Index n,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledSample s = sample(generator, n, rng);
  return Workload{std::move(s.data), std::move(s.labels), generator};
}

std::vector<ResultRow> run_repetition(const ExperimentSpec& spec,
                                      const Problem& problem,
                                      const std::vector<VariantSpec>& variants,
                                      int rep) {
  const auto urep = static_cast<std::uint64_t>(rep);
  std::optional<Workload> owned;
  if (!problem.fixed) {
    owned = simulate_workload(*problem.generator, spec.n,
                              derive_seed(spec.seed, kDataStream, urep));
  }
  const Workload& work = problem.fixed ? *problem.fixed : *owned;
  const DataMatrix& data = work.data;
  const Index n = data.rows();
  const Family family = problem.generator ? problem.generator->family() : Family::kGaussian;

  std::vector<ResultRow> rows;
  rows.reserve(variants.size());
  auto fail_row = [&](ResultRow row, const std::string& what) {
    row.ok = false;
    row.loglik = row.se = row.ari = kNaN;
    row.error = what;
    return row;
  };

  std::optional<PartitionInit> init;
  std::string init_error;
  try {
    std::mt19937_64 init_rng(derive_seed(spec.seed, kInitStream, urep));
    init = random_partition_init(data, problem.g, init_rng, family);
  } catch (const Error& e) {
    init_error = e.what();
  }

  for (const auto& v : variants) {
    ResultRow row;
    row.variant = v.id;
    row.repetition = rep;
    const bool minibatch = !v.kmeans && v.algorithm != Algorithm::kBatchEm;
    row.batch_size = minibatch ? batch_size_for(v.batch_fraction, n) : n;
    row.seed = derive_seed(spec.seed, sampling_stream(row.batch_size), urep);
    if (!init) {
      rows.push_back(fail_row(std::move(row), init_error));
      continue;
    }

    if (v.kmeans) {
      const auto wall_start = std::chrono::steady_clock::now();
      const double cpu_start = thread_cpu_seconds();
      const KMeansResult km = kmeans(data, problem.g, spec.epochs, init->labels);
      row.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - wall_start)
                             .count();
      row.cpu_seconds = thread_cpu_seconds() - cpu_start;
      row.iterations = km.sweeps;
      row.points_visited = static_cast<std::int64_t>(km.sweeps) * n;
      row.loglik = kNaN;
      row.se = kNaN;
      row.ari = work.labels.empty() ? kNaN : adjusted_rand_index(km.labels, work.labels);
      rows.push_back(std::move(row));
      continue;
    }

    try {
      RunConfig config;
      config.algorithm = v.algorithm;
      config.batch_size = row.batch_size;
      config.lr = spec.lr;
      config.truncation = spec.truncation;
      config.epochs = spec.epochs;
      config.polyak = v.polyak;
      std::mt19937_64 rng(row.seed);
      const RunRecord rec = run(data, config, init->theta, rng);
      const MixtureParams& est = rec.estimate();
      row.iterations = rec.iterations;
      row.points_visited = rec.points_visited;
      row.truncations = rec.truncation_events;
      row.wall_seconds = rec.wall_seconds;
      row.cpu_seconds = rec.cpu_seconds;
      row.loglik = dataset_loglik(data, est);
      if (spec.per_observation_loglik) row.loglik /= static_cast<double>(n);
      row.se = kNaN;
      if (work.truth && work.truth->size() == est.size() &&
          work.truth->spec() == est.spec()) {
        row.se = squared_error(est, *work.truth);
        if (spec.root_se) row.se = std::sqrt(row.se);
      }
      row.ari = work.labels.empty()
                    ? kNaN
                    : adjusted_rand_index(map_labels(data, est), work.labels);
      rows.push_back(std::move(row));
    } catch (const Error& e) {
      rows.push_back(fail_row(std::move(row), e.what()));
    }
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (repetitions < 1) throw Error(ErrorCode::kInvalidInput, "repetitions must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::kInvalidInput, "epochs must be >= 1");
  if (workers < 1) throw Error(ErrorCode::kInvalidInput, "workers must be >= 1");
  if (variants.empty()) throw Error(ErrorCode::kInvalidInput, "no variants");
  for (double f : batch_fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "batch fractions must lie in (0, 1]");
    }
  }
  lr.validate();
  truncation.validate();
}

std::vector<VariantSpec> resolve_variants(const ExperimentSpec& spec) {
  std::vector<VariantSpec> out;
  std::set<std::string> seen;
  for (const auto& name : spec.variants) {
    if (name == "kmeans") {
      out.push_back(VariantSpec{"kmeans", true, Algorithm::kBatchEm, 1.0, false});
    } else {
      std::string base = name;
      bool polyak = false;
      constexpr std::string_view kSuffix = "+polyak";
      if (base.size() > kSuffix.size() &&
          base.compare(base.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
        polyak = true;
        base.resize(base.size() - kSuffix.size());
      }
      const Algorithm alg = algorithm_from_string(base);
      if (alg == Algorithm::kBatchEm) {
        out.push_back(VariantSpec{name, false, alg, 1.0, polyak});
      } else {
        if (spec.batch_fractions.empty()) {
          throw Error(ErrorCode::kInvalidInput, "mini-batch variant without batch fractions");
        }
        for (double f : spec.batch_fractions) {
          out.push_back(VariantSpec{name + "@" + fmt::format("{:g}", f), false, alg, f, polyak});
        }
      }
    }
    if (!seen.insert(out.back().id).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate variant " + out.back().id);
    }
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t repetition) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ repetition);
}

std::uint64_t sampling_stream(Index batch_size) {
  return kSamplingStreamBase | static_cast<std::uint64_t>(batch_size);
}

Index batch_size_for(double fraction, Index n) {
  return std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(n))),
                           1, n);
}

Problem load_problem(const ExperimentSpec& spec) {
  Problem p;
  switch (spec.source) {
    case DataSource::kTemplateCsv:
      p.generator = fit_class_template(read_labeled_csv(spec.template_csv));
      break;
    case DataSource::kThetaFile:
      p.generator = read_mixture_file(spec.theta_file);
      break;
    case DataSource::kIdxPca: {
      IdxImageSet set = read_idx(spec.train_images, spec.train_labels);
      if (!spec.test_images.empty()) {
        set = concat(set, read_idx(spec.test_images, spec.test_labels));
      }
      const ReducedColumns dense = drop_constant_columns(set.to_matrix());
      const PcaModel pca = fit_pca(dense.data, spec.pca_components);
      auto work = std::make_shared<Workload>();
      work->data = project(pca, dense.data);
      if (set.labels) work->labels.assign(set.labels->begin(), set.labels->end());
      p.fixed = std::move(work);
      break;
    }
  }
  p.g = spec.g > 0 ? spec.g : (p.generator ? p.generator->size() : 10);
  return p;
}

ResultsTable run_grid(const ExperimentSpec& spec, const Problem& problem) {
  spec.validate();
  if (!problem.fixed && !problem.generator) {
    throw Error(ErrorCode::kInvalidInput, "problem has no data source");
  }
  const auto variants = resolve_variants(spec);
  std::vector<std::vector<ResultRow>> per_rep(static_cast<std::size_t>(spec.repetitions));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < spec.repetitions; r = next++) {
      per_rep[static_cast<std::size_t>(r)] = run_repetition(spec, problem, variants, r + 1);
    }
  };
  const int threads = std::min(spec.workers, spec.repetitions);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ResultsTable table;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (auto& rep_rows : per_rep) table.rows.push_back(std::move(rep_rows[v]));
  }
  return table;
}

ResultsTable run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_grid(spec, load_problem(spec));
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kMetricColumns = {
    "loglik", "se", "ari", "wall_seconds", "cpu_seconds", "iterations", "truncations"};

double metric_value(const ResultRow& row, const std::string& metric) {
  if (metric == "loglik") return row.loglik;
  if (metric == "se") return row.se;
  if (metric == "ari") return row.ari;
  if (metric == "wall_seconds") return row.wall_seconds;
  if (metric == "cpu_seconds") return row.cpu_seconds;
  if (metric == "iterations") return static_cast<double>(row.iterations);
  if (metric == "truncations") return static_cast<double>(row.truncations);
  throw Error(ErrorCode::kInvalidInput, "unknown metric '" + metric + "'");
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<std::string> variant_order(const ResultsTable& table) {
  std::vector<std::string> order;
  for (const auto& row : table.rows) {
    if (std::find(order.begin(), order.end(), row.variant) == order.end()) {
      order.push_back(row.variant);
    }
  }
  return order;
}

std::vector<double> column(const ResultsTable& table, const std::string& variant,
                           const std::string& metric) {
  std::vector<double> out;
  for (const auto& row : table.rows) {
    if (row.variant != variant || !row.ok) continue;
    const double v = metric_value(row, metric);
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<MetricSummary> summarize(const ResultsTable& table) {
  if (table.rows.empty()) throw Error(ErrorCode::kInvalidInput, "empty results table");
  std::vector<MetricSummary> out;
  for (const auto& variant : variant_order(table)) {
    for (const auto& metric : kMetricColumns) {
      const auto values = column(table, variant, metric);
      MetricSummary s{variant, metric, values.size(), kNaN, kNaN, kNaN, kNaN};
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean = sum / static_cast<double>(values.size());
        s.median = quantile(values, 0.5);
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
        s.se = s.sd / std::sqrt(static_cast<double>(values.size()));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<BoxplotRecord> emit_boxplot_data(const ResultsTable& table,
                                             const std::string& metric) {
  std::vector<BoxplotRecord> out;
  for (const auto& variant : variant_order(table)) {
    auto values = column(table, variant, metric);
    BoxplotRecord b;
    b.variant = variant;
    b.count = values.size();
    if (values.empty()) {
      b.min = b.q1 = b.median = b.q3 = b.max = b.whisker_low = b.whisker_high = kNaN;
      out.push_back(std::move(b));
      continue;
    }
    std::sort(values.begin(), values.end());
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile(values, 0.25);
    b.median = quantile(values, 0.5);
    b.q3 = quantile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.max;
    b.whisker_high = b.min;
    for (double v : values) {
      if (v < lo_fence || v > hi_fence) {
        b.outliers.push_back(v);
      } else {
        b.whisker_low = std::min(b.whisker_low, v);
        b.whisker_high = std::max(b.whisker_high, v);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string results_csv(const ResultsTable& table, bool include_timing) {
  std::string out =
      "variant,repetition,seed,batch_size,status,iterations,points_visited,"
      "truncations,loglik,se,ari,error";
  if (include_timing) out += ",wall_seconds,cpu_seconds";
  out += '\n';
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}", csv_escape(r.variant),
                       r.repetition, r.seed, r.batch_size, r.ok ? "ok" : "error",
                       r.iterations, r.points_visited, r.truncations,
                       fmt_double(r.loglik), fmt_double(r.se), fmt_double(r.ari),
                       csv_escape(r.error));
    if (include_timing) {
      out += fmt::format(",{},{}", fmt_double(r.wall_seconds), fmt_double(r.cpu_seconds));
    }
    out += '\n';
  }
  return out;
}

std::string summary_csv(const std::vector<MetricSummary>& summary) {
  std::string out = "variant,metric,count,mean,median,sd,se\n";
  for (const auto& s : summary) {
    out += fmt::format("{},{},{},{},{},{},{}\n", csv_escape(s.variant), s.metric, s.count,
                       fmt_double(s.mean), fmt_double(s.median), fmt_double(s.sd),
                       fmt_double(s.se));
  }
  return out;
}

nlohmann::json summary_json(const std::vector<MetricSummary>& summary) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : summary) {
    j[s.variant][s.metric] = {{"count", s.count}, {"mean", s.mean}, {"median", s.median},
                              {"sd", s.sd},       {"se", s.se}};
  }
  return j;
}

std::string boxplot_csv(const std::vector<BoxplotRecord>& records,
                        const std::string& metric) {
  std::string out = fmt::format("# metric: {}; quantiles: {}; whiskers: 1.5 * IQR (Tukey)\n",
                                metric, kQuantileRule);
  out += "variant,count,min,q1,median,q3,max,whisker_low,whisker_high,outliers\n";
  for (const auto& b : records) {
    std::string outliers;
    for (double v : b.outliers) {
      if (!outliers.empty()) outliers += ';';
      outliers += fmt_double(v);
    }
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_escape(b.variant), b.count,
                       fmt_double(b.min), fmt_double(b.q1), fmt_double(b.median),
                       fmt_double(b.q3), fmt_double(b.max), fmt_double(b.whisker_low),
                       fmt_double(b.whisker_high), outliers);
  }
  return out;
}

nlohmann::json experiment_metadata(const ExperimentSpec& spec, const std::string& command) {
  static const char* kSources[] = {"template-csv", "theta-file", "idx-pca"};
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : resolve_variants(spec)) variants.push_back(v.id);
  return {
      {"tool", "mbem"},
      {"version", kVersion},
      {"results_schema", kResultsSchema},
      {"command", command},
      {"seed_derivation", kSeedRule},
      {"quantile_rule", kQuantileRule},
      {"timing_columns", {"wall_seconds", "cpu_seconds"}},
      {"config",
       {{"source", kSources[static_cast<int>(spec.source)]},
        {"template-csv", spec.template_csv},
        {"theta-file", spec.theta_file},
        {"train-images", spec.train_images},
        {"train-labels", spec.train_labels},
        {"test-images", spec.test_images},
        {"test-labels", spec.test_labels},
        {"pcs", spec.pca_components},
        {"n", spec.n},
        {"g", spec.g},
        {"variant", spec.variants},
        {"batch-frac", spec.batch_fractions},
        {"gamma0", spec.lr.gamma0},
        {"alpha", spec.lr.alpha},
        {"c1", spec.truncation.c1},
        {"c2", spec.truncation.c2},
        {"c3", spec.truncation.c3},
        {"epochs", spec.epochs},
        {"reps", spec.repetitions},
        {"seed", spec.seed},
        {"workers", spec.workers},
        {"per-obs-loglik", spec.per_observation_loglik},
        {"root-se", spec.root_se}}},
      {"variants", variants},
  };
}

void write_outputs(const ResultsTable& table, const ExperimentSpec& spec,
                   const std::string& command, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir + ": " + ec.message());

  write_text(dir / "results.csv", results_csv(table));
  const auto summary = summarize(table);
  write_text(dir / "summary.csv", summary_csv(summary));
  write_text(dir / "summary.json", summary_json(summary).dump(2) + "\n");
  for (const auto& metric : kMetricColumns) {
    write_text(dir / ("boxplot_" + metric + ".csv"),
               boxplot_csv(emit_boxplot_data(table, metric), metric));
  }
  write_text(dir / "meta.json", experiment_metadata(spec, command).dump(2) + "\n");
}

ExperimentSpec apply_config(ExperimentSpec spec, const nlohmann::json& config) {
  if (!config.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
  try {
    for (const auto& [key, value] : config.items()) {
      if (key == "template-csv") {
        spec.template_csv = value.get<std::string>();
        spec.source = DataSource::kTemplateCsv;
      } else if (key == "theta-file") {
        spec.theta_file = value.get<std::string>();
        spec.source = DataSource::kThetaFile;
      } else if (key == "train-images") {
        spec.train_images = value.get<std::string>();
        spec.source = DataSource::kIdxPca;
      } else if (key == "train-labels") {
        spec.train_labels = value.get<std::string>();
      } else if (key == "test-images") {
        spec.test_images = value.get<std::string>();
      } else if (key == "test-labels") {
        spec.test_labels = value.get<std::string>();
      } else if (key == "pcs") {
        spec.pca_components = value.get<Index>();
      } else if (key == "n") {
        spec.n = value.get<Index>();
      } else if (key == "g") {
        spec.g = value.get<Index>();
      } else if (key == "variant") {
        spec.variants = value.get<std::vector<std::string>>();
      } else if (key == "batch-frac") {
        spec.batch_fractions = value.get<std::vector<double>>();
      } else if (key == "gamma0") {
        spec.lr.gamma0 = value.get<double>();
      } else if (key == "alpha") {
        spec.lr.alpha = value.get<double>();
      } else if (key == "c1") {
        spec.truncation.c1 = value.get<double>();
      } else if (key == "c2") {
        spec.truncation.c2 = value.get<double>();
      } else if (key == "c3") {
        spec.truncation.c3 = value.get<double>();
      } else if (key == "epochs") {
        spec.epochs = value.get<int>();
      } else if (key == "reps") {
        spec.repetitions = value.get<int>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "workers") {
        spec.workers = value.get<int>();
      } else if (key == "per-obs-loglik") {
        spec.per_observation_loglik = value.get<bool>();
      } else if (key == "root-se") {
        spec.root_se = value.get<bool>();
      } else {
        throw Error(ErrorCode::kParse, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  return spec;
}

}  // namespace mbem
