#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "ganfp/error.hpp"

namespace {

using namespace ganfp;
using namespace ganfp::cli;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> optimizer;
  std::optional<std::string> gen_loss;
  std::optional<std::size_t> jobs;
  std::optional<std::string> method;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--optimizer", o.optimizer, "Optimizer for every network")
      ->check(CLI::IsMember({"sgd", "adam"}));
  cmd->add_option("--gen-loss", o.gen_loss, "Generator adversarial term")
      ->check(CLI::IsMember({"minimax", "nonsaturating"}));
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void apply(const Overrides& o, ExperimentConfig& cfg) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.optimizer) {
    cfg.ganfp.optimizer.kind = *o.optimizer == "sgd" ? nn::OptimizerKind::kSgd : nn::OptimizerKind::kAdam;
  }
  if (o.gen_loss) {
    cfg.ganfp.gen_loss = *o.gen_loss == "minimax" ? gan::GenLoss::kMinimax : gan::GenLoss::kNonSaturating;
  }
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.method) cfg.method = parse_method(*o.method);
}

int run(int argc, char** argv) {
  CLI::App app{"GAN-FP failure prediction experiments"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides train_o;
  auto* train = app.add_subcommand("train", "Cross-validate one method and write metrics.csv");
  train->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--method", train_o.method, "Override the configured method");
  add_overrides(train, train_o);

  std::string checkpoint;
  std::string gen_out = "generated";
  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Sample from a trained GAN-FP checkpoint");
  generate->add_option("--checkpoint", checkpoint, "fold_k/model.ckpt from `train`")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "Sampling seed");
  generate->add_option("--out", gen_out, "Output directory");
  generate->add_option("--sensors", gen.sensors, "1-based sensors to plot for window data");

  std::string rs_input, rs_output, rs_method = "smote", rs_label = "label";
  resample::ResamplePlan plan;
  auto* rs = app.add_subcommand("resample", "Resample a labelled CSV");
  rs->add_option("--input", rs_input, "CSV with numeric features and a 0/1 label column")
      ->required()
      ->check(CLI::ExistingFile);
  rs->add_option("--output", rs_output, "Output CSV")->required();
  rs->add_option("--method", rs_method, "Resampling method")
      ->check(CLI::IsMember({"undersample", "smote", "adasyn"}));
  rs->add_option("--label-column", rs_label, "Label column name");
  rs->add_option("--k", plan.k_neighbors, "Nearest neighbours for smote/adasyn");
  rs->add_option("--ratio", plan.target_ratio, "Minority/majority ratio after resampling");
  rs->add_option("--beta", plan.beta, "ADASYN balance level");
  rs->add_option("--seed", plan.seed, "Seed");

  std::string bench_config, suite;
  std::vector<std::string> bench_methods;
  BenchmarkOptions bench;
  std::string external;
  Overrides bench_o;
  auto* bm = app.add_subcommand("benchmark", "Run every method on shared folds");
  auto* cfg_opt = bm->add_option("--config", bench_config, "JSON experiment config")->check(CLI::ExistingFile);
  bm->add_option("--suite", suite, "synth, fd001..fd004 or aps (files under GANFP_DATA_DIR)")
      ->excludes(cfg_opt);
  bm->add_option("--methods", bench_methods, "Subset of methods");
  bm->add_option("--imbalance-sweep", bench.imbalance_sweep,
                 "Also rerun with 1000*i non-failure training rows removed, i = 0..N");
  bm->add_option("--sweep-step", bench.sweep_step_rows, "Rows removed per sweep step");
  bm->add_option("--external", external, "CSV of method,row,score from another implementation")
      ->check(CLI::ExistingFile);
  add_overrides(bm, bench_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*train) {
    ExperimentConfig cfg = load_config(config_path);
    apply(train_o, cfg);
    const auto folds = cmd_train(cfg);
    std::size_t ok = 0;
    for (const auto& f : folds) ok += f.ok ? 1 : 0;
    std::cout << method_name(cfg.method) << ": " << ok << "/" << folds.size() << " folds ok, wrote "
              << (cfg.out / "metrics.csv").string() << '\n';
    return ok == folds.size() ? 0 : 3;
  }
  if (*generate) {
    const std::size_t n = cmd_generate(checkpoint, gen, gen_out);
    std::cout << "wrote " << n << " samples to " << gen_out << '\n';
    return 0;
  }
  if (*rs) {
    plan.method = rs_method == "undersample" ? resample::Method::kUndersample
                  : rs_method == "adasyn"    ? resample::Method::kAdasyn
                                             : resample::Method::kSmote;
    std::cout << cmd_resample(rs_input, plan, rs_output, rs_label) << '\n';
    return 0;
  }
  ExperimentConfig cfg;
  if (!bench_config.empty()) cfg = load_config(bench_config);
  else if (!suite.empty()) cfg.dataset = suite_dataset(suite);
  apply(bench_o, cfg);
  for (const auto& m : bench_methods) bench.methods.push_back(parse_method(m));
  if (!external.empty()) bench.external = external;
  cmd_benchmark(cfg, bench);
  std::cout << "wrote " << (cfg.out / "benchmark.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ganfp::Error& e) {
    std::cerr << "ganfp: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ganfp: unexpected error: " << e.what() << '\n';
    return 2;
  }
}
