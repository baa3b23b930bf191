#pragma once

// Experiment runner behind the `ganfp` command: config parsing, per-fold
// training of every method, and the CSV/SVG artifacts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ganfp/data.hpp"
#include "ganfp/ganfp.hpp"
#include "ganfp/metrics.hpp"
#include "ganfp/resample.hpp"
#include "json.hpp"

namespace ganfp::cli {

enum class Method { kGanFp, kInfoGanAug, kDnnWeighted, kDnnUndersample, kDnnSmote, kDnnAdasyn };

const std::vector<Method>& all_methods();
std::string method_name(Method m);
/// Throws FormatError listing the valid names.
Method parse_method(const std::string& name);

enum class DatasetKind { kSynth, kCmapss, kAps, kCsv };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynth;
  /// Resolved file path for file-backed kinds.
  std::string path;
  data::SynthOptions synth;
  data::WindowOptions window;
  std::string label_column = "label";
};

struct ExperimentConfig {
  DatasetSpec dataset;
  Method method = Method::kGanFp;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out = "ganfp_out";
  gan::GanFpConfig ganfp;
  /// Explicit shared prefix; otherwise the architecture's recommendation.
  std::optional<std::size_t> shared_prefix_k;
  /// Hidden width for datasets without a fixed layout (synth, csv).
  std::size_t hidden = 64;
  std::size_t k_neighbors = 5;
  double adasyn_beta = 1.0;
  bool save_checkpoints = true;
  /// Folds trained concurrently; results do not depend on it.
  std::size_t jobs = 1;
};

/// Reads the JSON config. Relative dataset paths resolve against the config
/// file's directory, then GANFP_DATA_DIR. Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Data root from GANFP_DATA_DIR, or empty.
std::filesystem::path data_root();

/// Loads the dataset; APS missing values stay NaN until a fold imputes them.
data::Dataset load_dataset(const DatasetSpec& spec);

/// Fixed layouts for APS and CMAPSS widths, APS-shaped networks otherwise.
gan::Architecture architecture_for(std::size_t dim, std::size_t hidden);

/// Per-fold preprocessing fit on training rows only.
struct Preprocessor {
  data::MedianImputer imputer;
  data::NormStats norm;

  static Preprocessor fit(const Matrix& X_train);
  Matrix apply(Matrix X) const;
};

struct MethodRun {
  std::vector<double> scores;
  std::optional<gan::TrainedModel> ganfp;
  std::optional<nn::Network> classifier;
};

/// Trains `method` on preprocessed training rows and scores the test rows.
MethodRun run_method(Method method, const ExperimentConfig& cfg, const gan::Architecture& arch,
                     const Matrix& X_train, std::span<const int> y_train, const Matrix& X_test,
                     std::uint64_t seed);

struct FoldOutcome {
  metrics::MetricsReport report;
  bool ok = true;
  std::string status = "ok";
};

/// `fold,<report columns>,status` rows, one per fold, then a mean row over
/// successful folds.
void write_metrics_csv(const std::filesystem::path& path, std::span<const FoldOutcome> folds);

/// Runs every fold of `cfg.method` and writes metrics.csv plus per-fold
/// history.csv and model.ckpt under cfg.out.
std::vector<FoldOutcome> cmd_train(const ExperimentConfig& cfg);

struct GenerateOptions {
  std::size_t n = 16;
  std::uint64_t seed = 0;
  /// Sensors drawn in the SVG for windowed data (1-based).
  std::vector<std::size_t> sensors{1, 2, 3, 4};
};

/// Samples from a GAN-FP checkpoint in original feature units; writes
/// samples.csv (features plus intended_label) and samples.svg. Returns the
/// number of rows written.
std::size_t cmd_generate(const std::filesystem::path& checkpoint, const GenerateOptions& opts,
                         const std::filesystem::path& out_dir);

/// Resamples a labelled CSV and returns the summary line.
std::string cmd_resample(const std::filesystem::path& input, const resample::ResamplePlan& plan,
                         const std::filesystem::path& output, const std::string& label_column = "label");

struct BenchmarkOptions {
  std::vector<Method> methods;
  /// Largest sweep step; 0 disables the imbalance sweep.
  std::size_t imbalance_sweep = 0;
  std::size_t sweep_step_rows = 1000;
  std::optional<std::filesystem::path> external;
};

/// Every method on shared folds: benchmark.csv (mean per method, external
/// rows appended), benchmark_folds.csv, and sweep.csv when requested.
void cmd_benchmark(const ExperimentConfig& cfg, const BenchmarkOptions& opts);

/// Dataset spec for a named suite: synth, fd001..fd004 or aps. File suites
/// resolve under GANFP_DATA_DIR and throw FormatError naming the expected
/// file when it is missing.
DatasetSpec suite_dataset(const std::string& suite);

}  // namespace ganfp::cli
