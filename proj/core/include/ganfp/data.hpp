#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ganfp/matrix.hpp"

namespace ganfp::data {

inline constexpr std::size_t kCmapssColumns = 26;
inline constexpr std::size_t kCmapssSettings = 3;
inline constexpr std::size_t kCmapssSensors = 21;

/// One run-to-failure trajectory from a CMAPSS file.
struct EngineSeries {
  int engine_id = 0;
  std::vector<int> cycles;
  std::vector<std::array<double, kCmapssSettings>> settings;
  std::vector<std::array<double, kCmapssSensors>> sensors;

  std::size_t length() const { return cycles.size(); }
};

/// Features plus binary labels, 1 = failure.
struct Dataset {
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> feature_names;
  std::string source;

  std::size_t rows() const { return X.rows(); }
  std::size_t dim() const { return X.cols(); }
  std::size_t count(int label) const;
};

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);

/// Whitespace-delimited 26-column NASA text: engine id, cycle, 3 settings,
/// 21 sensors. Series come back sorted by engine id.
std::vector<EngineSeries> load_cmapss(const std::string& path);
std::vector<EngineSeries> parse_cmapss(std::istream& in, const std::string& source = "<stream>");

struct WindowOptions {
  std::size_t window = 15;
  /// A window is a failure sample when its last cycle is fewer than this many
  /// cycles before the engine's final cycle.
  std::size_t fail_horizon = 20;
  std::size_t stride = 1;
};

/// Flattens each window of sensor readings (settings excluded) cycle-major:
/// window x 21 features. Windows never span two engines; engines shorter than
/// the window contribute nothing.
Dataset window_cmapss(std::span<const EngineSeries> series, const WindowOptions& opts = {});

/// Scania APS CSV: a `class` column of pos/neg and numeric features, `na`
/// meaning missing. Lines before the header are ignored. Missing cells are
/// returned as NaN; impute with MedianImputer fit on training rows.
Dataset load_aps(const std::string& path);

/// Generic CSV: numeric feature columns plus a `label` column in {0,1}.
Dataset load_labeled_csv(const std::string& path, const std::string& label_column = "label");
void write_labeled_csv(std::ostream& out, const Dataset& ds,
                       const std::string& label_column = "label");

struct MedianImputer {
  std::vector<double> medians;

  /// Replaces NaN cells in place.
  void apply(Matrix& X) const;
};

/// Column medians over `rows` only (all rows if empty), ignoring NaN. A column
/// with no observed value gets median 0.
MedianImputer fit_median_imputer(const Matrix& X, std::span<const std::size_t> rows = {});

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kMinStddev = 1e-12;

/// Per-column mean and population standard deviation. A deviation below
/// kMinStddev is replaced by 1.
NormStats fit_normalize(const Matrix& X_train);
Matrix apply_normalize(const NormStats& stats, const Matrix& X);
Matrix invert_normalize(const NormStats& stats, const Matrix& Z);

struct SynthOptions {
  std::size_t n_major = 5000;
  std::size_t n_minor = 100;
  std::size_t d = 20;
  /// Distance of each failure mode's centre from the majority centre.
  double separation = 3.0;
  /// Isotropic standard deviation of every mixture component.
  double noise = 1.0;
  std::uint64_t seed = 0;
};

/// Majority ~ N(0, noise^2 I). Minority is an even mixture of two modes at
/// separation*e0 and separation*e1, standing in for distinct failure modes.
/// Rows are shuffled.
Dataset synth_imbalanced(const SynthOptions& opts);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class shuffle, then round-robin assignment to folds. Index lists are
/// sorted. Throws DegenerateDataError if a class has fewer than k rows.
std::vector<Fold> stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed);

}  // namespace ganfp::data
