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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mbem/error.hpp"
#include "mbem/experiment.hpp"
#include "mbem/idx.hpp"
#include "mbem/preprocess.hpp"
#include "test_util.hpp"

using namespace mbem;

namespace {

Problem small_problem() {
  Problem p;
  p.generator = testing::gaussian_1d({0.5, 0.5}, {-3.0, 3.0}, {1.0, 1.0});
  p.g = 2;
  return p;
}

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.n = 400;
  s.repetitions = 3;
  s.epochs = 3;
  s.seed = 42;
  return s;
}

ResultsTable table_of(const std::string& variant, std::vector<double> values) {
  ResultsTable t;
  int rep = 1;
  for (double v : values) {
    ResultRow r;
    r.variant = variant;
    r.repetition = rep++;
    r.loglik = v;
    t.rows.push_back(r);
  }
  return t;
}

const MetricSummary& find(const std::vector<MetricSummary>& s, const std::string& metric) {
  for (const auto& m : s)
    if (m.metric == metric) return m;
  FAIL("metric missing");
  return s.front();
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(derive_seed(1, kDataStream, 1) ==
        splitmix64(splitmix64(splitmix64(1) ^ kDataStream) ^ 1));
  CHECK(derive_seed(1, kDataStream, 1) != derive_seed(1, kDataStream, 2));
  CHECK(derive_seed(1, kDataStream, 1) != derive_seed(1, kInitStream, 1));
  CHECK(sampling_stream(100) != sampling_stream(200));
  CHECK(batch_size_for(0.1, 1000) == 100);
  CHECK(batch_size_for(0.2, 1000) == 200);
  CHECK(batch_size_for(1e-9, 1000) == 1);
}

TEST_CASE("variant resolution") {
  ExperimentSpec s;
  const auto v = resolve_variants(s);
  CHECK(v.size() == 9);
  CHECK(v[0].id == "batch-em");
  CHECK(v[1].id == "minibatch@0.1");
  CHECK(v[2].id == "minibatch@0.2");
  CHECK(v[3].id == "minibatch+polyak@0.1");
  CHECK(v[3].polyak);
  CHECK(v[8].algorithm == Algorithm::kTruncatedMiniBatch);
  s.variants = {"kmeans", "batch-em+polyak"};
  CHECK(resolve_variants(s).size() == 2);
  s.variants = {"gradient-descent"};
  CHECK_THROWS_AS(resolve_variants(s), Error);
  s.variants = {"batch-em", "batch-em"};
  CHECK_THROWS_AS(resolve_variants(s), Error);
}

TEST_CASE("grid shape, fairness and consistency") {
  ExperimentSpec spec = small_spec();
  const auto table = run_grid(spec, small_problem());
  CHECK(table.rows.size() == 9 * 3);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& r = table.rows[k];
    CHECK(r.ok);
    CHECK(r.repetition == static_cast<int>(k % 3) + 1);
    // Visits equal epochs * n within one batch.
    const auto budget = static_cast<std::int64_t>(spec.epochs) * spec.n;
    CHECK(std::llabs(r.points_visited - budget) <= r.batch_size + r.batch_size);
    CHECK(r.points_visited >= budget);
  }

  spec.variants = {"batch-em"};
  spec.repetitions = 1;
  const auto one = run_grid(spec, small_problem());
  REQUIRE(one.rows.size() == 1);

  // Recompute the single run by hand from the documented seeds.
  std::mt19937_64 data_rng(derive_seed(spec.seed, kDataStream, 1));
  const auto draw = sample(*small_problem().generator, spec.n, data_rng);
  std::mt19937_64 init_rng(derive_seed(spec.seed, kInitStream, 1));
  const auto init = random_partition_init(draw.data, 2, init_rng);
  RunConfig config;
  config.algorithm = Algorithm::kBatchEm;
  config.epochs = spec.epochs;
  std::mt19937_64 rng(one.rows[0].seed);
  const auto rec = run(draw.data, config, init.theta, rng);
  CHECK(one.rows[0].loglik == dataset_loglik(draw.data, rec.theta));
  CHECK(one.rows[0].se == squared_error(rec.theta, *small_problem().generator));
}

TEST_CASE("determinism across worker counts") {
  ExperimentSpec spec = small_spec();
  spec.repetitions = 4;
  const auto a = results_csv(run_grid(spec, small_problem()), false);
  spec.workers = 3;
  const auto b = results_csv(run_grid(spec, small_problem()), false);
  CHECK(a == b);
}

TEST_CASE("failures are recorded per row") {
  ExperimentSpec spec = small_spec();
  spec.n = 5;  // too few points for a two-component initialization
  spec.variants = {"batch-em"};
  const auto t = run_grid(spec, small_problem());
  REQUIRE(t.rows.size() == 3);
  CHECK_FALSE(t.rows[0].ok);
  CHECK(std::isnan(t.rows[0].loglik));
  CHECK_FALSE(t.rows[0].error.empty());
  CHECK(results_csv(t).find(",error,") != std::string::npos);
}

TEST_CASE("summaries") {
  const auto constant = summarize(table_of("v", {2.0, 2.0, 2.0}));
  CHECK(find(constant, "loglik").se == 0.0);
  const auto three = summarize(table_of("v", {1.0, 2.0, 3.0}));
  CHECK(find(three, "loglik").mean == 2.0);
  CHECK(find(three, "loglik").median == 2.0);

  // Alternating +-0.04 around 1 over 100 repetitions: sd 0.04 (up to the
  // n - 1 normalization) and SE = sd / 10.
  std::vector<double> alt;
  for (int i = 0; i < 100; ++i) alt.push_back(1.0 + (i % 2 ? 0.04 : -0.04));
  const auto& s = find(summarize(table_of("v", alt)), "loglik");
  CHECK(s.sd == doctest::Approx(0.04 * std::sqrt(100.0 / 99.0)).epsilon(1e-12));
  CHECK(s.se == doctest::Approx(s.sd / 10.0).epsilon(1e-12));
}

TEST_CASE("quantiles and box plots") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(quantile(v, 0.5) == 50.5);
  CHECK(quantile(v, 0.25) == 25.75);
  CHECK(quantile(v, 0.75) == 75.25);

  const auto single = emit_boxplot_data(table_of("v", {3.5}), "loglik");
  REQUIRE(single.size() == 1);
  CHECK(single[0].min == 3.5);
  CHECK(single[0].q1 == 3.5);
  CHECK(single[0].median == 3.5);
  CHECK(single[0].q3 == 3.5);
  CHECK(single[0].max == 3.5);

  const auto within = emit_boxplot_data(table_of("v", v), "loglik");
  CHECK(within[0].outliers.empty());
  v.push_back(1000.0);
  const auto outlier = emit_boxplot_data(table_of("v", v), "loglik");
  CHECK(outlier[0].outliers == std::vector<double>{1000.0});
  CHECK(outlier[0].whisker_high == 100.0);

  const std::string csv = boxplot_csv(outlier, "loglik");
  CHECK(csv.rfind("# metric: loglik", 0) == 0);
}

TEST_CASE("output files and schema") {
  ExperimentSpec spec = small_spec();
  spec.variants = {"batch-em", "minibatch"};
  spec.batch_fractions = {0.25};
  const auto table = run_grid(spec, small_problem());
  const std::string csv = results_csv(table);
  CHECK(csv.rfind("variant,repetition,seed,batch_size,status,iterations,points_visited,"
                  "truncations,loglik,se,ari,error,wall_seconds,cpu_seconds\n",
                  0) == 0);
  const auto dir = std::filesystem::temp_directory_path() / "mbem_experiment_test";
  std::filesystem::remove_all(dir);
  write_outputs(table, spec, "simulate", dir.string());
  for (const char* f : {"results.csv", "summary.csv", "summary.json", "meta.json",
                        "boxplot_loglik.csv", "boxplot_se.csv", "boxplot_ari.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream meta(dir / "meta.json");
  const auto j = nlohmann::json::parse(meta);
  CHECK(j["results_schema"].get<std::string>() == kResultsSchema);
  CHECK(j["config"]["seed"] == 42);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config documents") {
  ExperimentSpec s;
  s = apply_config(s, nlohmann::json{{"seed", 7}, {"epochs", 4}, {"batch-frac", {0.5}},
                                     {"variant", {"minibatch"}}, {"gamma0", 0.9}});
  CHECK(s.seed == 7);
  CHECK(s.epochs == 4);
  CHECK(s.batch_fractions == std::vector<double>{0.5});
  CHECK(s.lr.gamma0 == 0.9);
  CHECK_THROWS_AS(apply_config(s, nlohmann::json{{"sede", 7}}), Error);
  CHECK_THROWS_AS(apply_config(s, nlohmann::json{{"seed", "x"}}), Error);
  ExperimentSpec bad;
  bad.repetitions = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("IDX pipeline with a k-means baseline") {
  // Two synthetic digit classes on a 4 x 4 grid; pixel 0 is always blank.
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> noise(0, 40);
  IdxImageSet set;
  set.count = 80;
  set.rows = 4;
  set.cols = 4;
  std::vector<std::uint8_t> labels;
  for (std::uint32_t i = 0; i < set.count; ++i) {
    const int cls = static_cast<int>(i % 2);
    labels.push_back(static_cast<std::uint8_t>(cls));
    for (int k = 0; k < 16; ++k) {
      const bool on = k > 0 && ((cls == 0) == (k < 8));
      set.pixels.push_back(k == 0 ? 0 : static_cast<std::uint8_t>((on ? 200 : 20) + noise(rng)));
    }
  }
  const auto dir = std::filesystem::temp_directory_path() / "mbem_idx_pipeline";
  std::filesystem::create_directories(dir);
  auto dump = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
    std::ofstream(dir / name, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return (dir / name).string();
  };
  ExperimentSpec spec;
  spec.source = DataSource::kIdxPca;
  spec.train_images = dump("images", encode_idx_images(set));
  spec.train_labels = dump("labels", encode_idx_labels(labels));
  spec.pca_components = 2;
  spec.g = 2;
  spec.variants = {"batch-em", "minibatch", "kmeans"};
  spec.batch_fractions = {0.5};
  spec.repetitions = 2;
  spec.epochs = 5;

  const Problem p = load_problem(spec);
  REQUIRE(p.fixed);
  CHECK(p.fixed->data.cols() == 2);
  CHECK(p.fixed->labels.size() == 80);
  CHECK_FALSE(p.generator.has_value());

  const auto table = run_grid(spec, p);
  REQUIRE(table.rows.size() == 6);
  for (const auto& r : table.rows) {
    CHECK(r.ok);
    CHECK(std::isnan(r.se));
    CHECK(std::isfinite(r.ari));
  }
  // The classes sit ten noise widths apart; Lloyd separates them exactly.
  CHECK(table.rows[4].ari == 1.0);
  CHECK(table.rows[4].variant == "kmeans");
  CHECK(std::isnan(table.rows[4].loglik));
  std::filesystem::remove_all(dir);
}
