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

// mbem: experiment runner.
//
//   mbem simulate --template-csv data/iris.csv --n 100000 --reps 20 --out-dir out
//   mbem mnist --train-images train-images-idx3-ubyte.gz ... --out-dir out
//   mbem bench --template-csv data/iris.csv --variant minibatch --batch-frac 0.1
//
// Every flag can also be given in a JSON config (--config); flags win.

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mbem/error.hpp"
#include "mbem/experiment.hpp"
#include "mbem/mixture_json.hpp"
#include "mbem/version.hpp"

namespace {

using mbem::ExperimentSpec;

// Flag values are parsed into a scratch spec; only flags that were actually
// given are copied over the config-file values.
struct GridFlags {
  ExperimentSpec v;
  std::string config;
  std::string out_dir;
  std::vector<std::pair<CLI::Option*, void (*)(ExperimentSpec&, const ExperimentSpec&)>> opts;

  template <typename F>
  void bind(CLI::Option* opt, F copy) {
    opts.emplace_back(opt, +copy);
  }
};

void add_common_flags(CLI::App* app, GridFlags& f, bool require_out_dir) {
  app->add_option("--config", f.config, "JSON config whose keys mirror the flag names")
      ->check(CLI::ExistingFile);
  auto* out = app->add_option("--out-dir", f.out_dir, "output directory");
  if (require_out_dir) out->required();
  f.bind(app->add_option("--seed", f.v.seed, "master seed"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.seed = v.seed; });
  f.bind(app->add_option("--epochs", f.v.epochs, "epoch budget per algorithm"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.epochs = v.epochs; });
  f.bind(app->add_option("--batch-frac", f.v.batch_fractions,
                         "mini-batch size as a fraction of n (repeatable)"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.batch_fractions = v.batch_fractions; });
  f.bind(app->add_option("--variant", f.v.variants,
                         "batch-em | minibatch | minibatch-truncated [+polyak] | kmeans "
                         "(repeatable)"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.variants = v.variants; });
  f.bind(app->add_option("--gamma0", f.v.lr.gamma0, "learning-rate scale"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.lr.gamma0 = v.lr.gamma0; });
  f.bind(app->add_option("--alpha", f.v.lr.alpha, "learning-rate decay exponent"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.lr.alpha = v.lr.alpha; });
  f.bind(app->add_option("--c1", f.v.truncation.c1, "truncation weight constant"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.truncation.c1 = v.truncation.c1; });
  f.bind(app->add_option("--c2", f.v.truncation.c2, "truncation mean constant"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.truncation.c2 = v.truncation.c2; });
  f.bind(app->add_option("--c3", f.v.truncation.c3, "truncation eigenvalue constant"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.truncation.c3 = v.truncation.c3; });
  f.bind(app->add_option("--reps", f.v.repetitions, "repetitions"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.repetitions = v.repetitions; });
  f.bind(app->add_option("--workers", f.v.workers, "parallel repetitions"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.workers = v.workers; });
  f.bind(app->add_option("--g", f.v.g, "mixture components (default: template size)"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.g = v.g; });
  f.bind(app->add_flag("--per-obs-loglik", f.v.per_observation_loglik,
                       "report log-likelihood per observation"),
         [](ExperimentSpec& s, const ExperimentSpec& v) {
           s.per_observation_loglik = v.per_observation_loglik;
         });
  f.bind(app->add_flag("--root-se", f.v.root_se, "report the root of the squared error"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.root_se = v.root_se; });
}

void add_simulation_flags(CLI::App* app, GridFlags& f) {
  auto* csv = app->add_option("--template-csv", f.v.template_csv,
                              "labeled CSV; one Gaussian per class, equal weights");
  auto* theta = app->add_option("--theta-file", f.v.theta_file, "mixture JSON template");
  csv->excludes(theta);
  f.bind(csv, [](ExperimentSpec& s, const ExperimentSpec& v) {
    s.template_csv = v.template_csv;
    s.source = mbem::DataSource::kTemplateCsv;
  });
  f.bind(theta, [](ExperimentSpec& s, const ExperimentSpec& v) {
    s.theta_file = v.theta_file;
    s.source = mbem::DataSource::kThetaFile;
  });
  f.bind(app->add_option("--n", f.v.n, "simulated sample size"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.n = v.n; });
}

void add_mnist_flags(CLI::App* app, GridFlags& f) {
  f.bind(app->add_option("--train-images", f.v.train_images, "IDX images (gzip ok)"),
         [](ExperimentSpec& s, const ExperimentSpec& v) {
           s.train_images = v.train_images;
           s.source = mbem::DataSource::kIdxPca;
         });
  f.bind(app->add_option("--train-labels", f.v.train_labels, "IDX labels"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.train_labels = v.train_labels; });
  f.bind(app->add_option("--test-images", f.v.test_images, "second IDX image file"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.test_images = v.test_images; });
  f.bind(app->add_option("--test-labels", f.v.test_labels, "second IDX label file"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.test_labels = v.test_labels; });
  f.bind(app->add_option("--pcs", f.v.pca_components, "principal components kept"),
         [](ExperimentSpec& s, const ExperimentSpec& v) { s.pca_components = v.pca_components; });
}

ExperimentSpec resolve(const GridFlags& f, ExperimentSpec base) {
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw mbem::Error(mbem::ErrorCode::kParse, f.config + ": " + e.what());
    }
    base = mbem::apply_config(std::move(base), j);
  }
  for (const auto& [opt, copy] : f.opts) {
    if (opt->count() > 0) copy(base, f.v);
  }
  return base;
}

void require_source(const ExperimentSpec& s) {
  if (s.source == mbem::DataSource::kTemplateCsv && s.template_csv.empty()) {
    throw mbem::Error(mbem::ErrorCode::kInvalidInput,
                      "a data source is required (--template-csv or --theta-file)");
  }
  if (s.source == mbem::DataSource::kIdxPca &&
      (s.train_images.empty() || s.train_labels.empty())) {
    throw mbem::Error(mbem::ErrorCode::kInvalidInput,
                      "--train-images and --train-labels are required");
  }
}

void print_summary(const mbem::ResultsTable& table) {
  for (const auto& s : mbem::summarize(table)) {
    if (s.metric != "loglik" && s.metric != "se" && s.metric != "ari") continue;
    fmt::print("{:<34} {:<7} n={:<4} mean={:<14.6g} median={:<14.6g} se={:.3g}\n", s.variant,
               s.metric, s.count, s.mean, s.median, s.se);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mini-batch EM for exponential-family mixtures"};
  app.set_version_flag("--version", mbem::kVersion);
  app.require_subcommand(1);

  GridFlags sim;
  auto* simulate = app.add_subcommand("simulate", "template synthesis + variant grid");
  add_common_flags(simulate, sim, true);
  add_simulation_flags(simulate, sim);

  GridFlags mn;
  mn.v.variants = {"batch-em", "minibatch-truncated", "minibatch-truncated+polyak", "kmeans"};
  mn.v.batch_fractions = {0.1};
  mn.v.g = 10;
  auto* mnist = app.add_subcommand("mnist", "IDX -> PCA -> variant grid with k-means baseline");
  add_common_flags(mnist, mn, true);
  add_mnist_flags(mnist, mn);

  GridFlags bn;
  bn.v.variants = {"minibatch"};
  bn.v.batch_fractions = {0.1};
  auto* bench = app.add_subcommand("bench", "single run, printed as JSON");
  add_common_flags(bench, bn, false);
  add_simulation_flags(bench, bn);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      ExperimentSpec defaults;
      ExperimentSpec spec = resolve(sim, defaults);
      require_source(spec);
      const auto table = mbem::run_experiment(spec);
      mbem::write_outputs(table, spec, "simulate", sim.out_dir);
      print_summary(table);
    } else if (mnist->parsed()) {
      ExperimentSpec defaults;
      defaults.source = mbem::DataSource::kIdxPca;
      defaults.variants = mn.v.variants;
      defaults.batch_fractions = mn.v.batch_fractions;
      defaults.g = mn.v.g;
      ExperimentSpec spec = resolve(mn, defaults);
      require_source(spec);
      const auto table = mbem::run_experiment(spec);
      mbem::write_outputs(table, spec, "mnist", mn.out_dir);
      print_summary(table);
    } else if (bench->parsed()) {
      ExperimentSpec defaults;
      defaults.variants = bn.v.variants;
      defaults.batch_fractions = bn.v.batch_fractions;
      ExperimentSpec spec = resolve(bn, defaults);
      spec.repetitions = 1;
      require_source(spec);
      const auto variants = mbem::resolve_variants(spec);
      if (variants.size() != 1) {
        throw mbem::Error(mbem::ErrorCode::kInvalidInput,
                          "bench runs exactly one variant and one batch fraction");
      }
      const auto table = mbem::run_experiment(spec);
      const auto& r = table.rows.front();
      nlohmann::json out = {{"variant", r.variant},
                            {"status", r.ok ? "ok" : "error"},
                            {"batch_size", r.batch_size},
                            {"iterations", r.iterations},
                            {"points_visited", r.points_visited},
                            {"truncations", r.truncations},
                            {"loglik", r.loglik},
                            {"se", r.se},
                            {"ari", r.ari},
                            {"wall_seconds", r.wall_seconds},
                            {"cpu_seconds", r.cpu_seconds},
                            {"error", r.error}};
      std::cout << out.dump(2) << "\n";
      if (!bn.out_dir.empty()) mbem::write_outputs(table, spec, "bench", bn.out_dir);
      if (!r.ok) return 1;
    }
  } catch (const mbem::Error& e) {
    fmt::print(stderr, "mbem: {}\n", e.what());
    return 2;
  }
  return 0;
}
