#include "ganfp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ganfp/csv.hpp"
#include "ganfp/error.hpp"
#include "ganfp/rng.hpp"

namespace ganfp::data {

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.X = select_rows(ds.X, rows);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.y.push_back(ds.y.at(r));
  out.feature_names = ds.feature_names;
  out.source = ds.source;
  return out;
}

std::vector<EngineSeries> parse_cmapss(std::istream& in, const std::string& source) {
  std::map<int, EngineSeries> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != kCmapssColumns) {
      throw FormatError(source + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(tokens.size()) + " columns, expected " +
                        std::to_string(kCmapssColumns));
    }
    std::array<double, kCmapssColumns> v{};
    for (std::size_t i = 0; i < kCmapssColumns; ++i) v[i] = csv::parse_double(tokens[i], lineno);
    const int id = static_cast<int>(v[0]);
    const int cycle = static_cast<int>(v[1]);
    if (static_cast<double>(id) != v[0] || static_cast<double>(cycle) != v[1]) {
      throw ParseError(source + ": engine id and cycle must be integers", lineno);
    }
    EngineSeries& s = by_id[id];
    s.engine_id = id;
    const int expected = s.cycles.empty() ? 1 : s.cycles.back() + 1;
    if (cycle != expected) {
      throw ParseError(source + ": engine " + std::to_string(id) + " cycle " +
                           std::to_string(cycle) + ", expected " + std::to_string(expected),
                       lineno);
    }
    s.cycles.push_back(cycle);
    std::array<double, kCmapssSettings> settings{};
    std::copy_n(v.begin() + 2, kCmapssSettings, settings.begin());
    std::array<double, kCmapssSensors> sensors{};
    std::copy_n(v.begin() + 2 + kCmapssSettings, kCmapssSensors, sensors.begin());
    s.settings.push_back(settings);
    s.sensors.push_back(sensors);
  }
  std::vector<EngineSeries> out;
  out.reserve(by_id.size());
  for (auto& [id, s] : by_id) out.push_back(std::move(s));
  return out;
}

std::vector<EngineSeries> load_cmapss(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open CMAPSS file " + path);
  return parse_cmapss(in, path);
}

Dataset window_cmapss(std::span<const EngineSeries> series, const WindowOptions& opts) {
  if (opts.window == 0 || opts.stride == 0) {
    throw ParameterError("window_cmapss: window and stride must be >= 1");
  }
  const std::size_t width = opts.window * kCmapssSensors;
  std::vector<double> values;
  Dataset ds;
  for (const auto& s : series) {
    const std::size_t len = s.length();
    if (len < opts.window) continue;
    for (std::size_t start = 0; start + opts.window <= len; start += opts.stride) {
      const std::size_t last = start + opts.window - 1;
      for (std::size_t t = start; t <= last; ++t) {
        values.insert(values.end(), s.sensors[t].begin(), s.sensors[t].end());
      }
      ds.y.push_back((len - 1 - last) < opts.fail_horizon ? 1 : 0);
    }
  }
  ds.X = Matrix(ds.y.size(), width, std::move(values));
  for (std::size_t t = 0; t < opts.window; ++t) {
    for (std::size_t j = 0; j < kCmapssSensors; ++j) {
      ds.feature_names.push_back("s" + std::to_string(j + 1) + "_t" + std::to_string(t + 1));
    }
  }
  ds.source = "cmapss";
  return ds;
}

Dataset load_aps(const std::string& path) {
  const csv::Table t = csv::read_table(path, ',', "class");
  const std::size_t cls = t.column("class");
  if (cls == std::string::npos) throw FormatError(path + ": missing 'class' column");
  Dataset ds;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != cls) ds.feature_names.push_back(t.header[c]);
  }
  std::vector<double> values;
  values.reserve(t.rows.size() * ds.feature_names.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[cls] == "pos") ds.y.push_back(1);
    else if (row[cls] == "neg") ds.y.push_back(0);
    else throw ParseError(path + ": class must be pos or neg, got '" + row[cls] + "'", t.lines[r]);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == cls) continue;
      values.push_back(row[c] == "na" ? std::numeric_limits<double>::quiet_NaN()
                                      : csv::parse_double(row[c], t.lines[r]));
    }
  }
  ds.X = Matrix(ds.y.size(), ds.feature_names.size(), std::move(values));
  ds.source = "aps";
  return ds;
}

Dataset load_labeled_csv(const std::string& path, const std::string& label_column) {
  const csv::Table t = csv::read_table(path);
  const std::size_t lab = t.column(label_column);
  if (lab == std::string::npos) {
    throw FormatError(path + ": missing '" + label_column + "' column");
  }
  Dataset ds;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != lab) ds.feature_names.push_back(t.header[c]);
  }
  std::vector<double> values;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const double label = csv::parse_double(row[lab], t.lines[r]);
    if (label != 0.0 && label != 1.0) throw ParseError(path + ": label must be 0 or 1", t.lines[r]);
    ds.y.push_back(static_cast<int>(label));
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != lab) values.push_back(csv::parse_double(row[c], t.lines[r]));
    }
  }
  ds.X = Matrix(ds.y.size(), ds.feature_names.size(), std::move(values));
  ds.source = path;
  return ds;
}

void write_labeled_csv(std::ostream& out, const Dataset& ds, const std::string& label_column) {
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    out << (c < ds.feature_names.size() ? ds.feature_names[c] : "x" + std::to_string(c)) << ',';
  }
  out << label_column << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (double v : ds.X.row(r)) out << csv::format(v) << ',';
    out << ds.y[r] << '\n';
  }
}

void MedianImputer::apply(Matrix& X) const {
  if (X.cols() != medians.size()) throw DimensionError("MedianImputer: column count mismatch");
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      if (std::isnan(X(r, c))) X(r, c) = medians[c];
    }
  }
}

MedianImputer fit_median_imputer(const Matrix& X, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(X.rows());
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  MedianImputer imp;
  imp.medians.assign(X.cols(), 0.0);
  std::vector<double> col;
  for (std::size_t c = 0; c < X.cols(); ++c) {
    col.clear();
    for (std::size_t r : rows) {
      if (!std::isnan(X(r, c))) col.push_back(X(r, c));
    }
    if (col.empty()) continue;
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    imp.medians[c] = n % 2 == 1 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2.0;
  }
  return imp;
}

NormStats fit_normalize(const Matrix& X_train) {
  NormStats s;
  s.mean.assign(X_train.cols(), 0.0);
  s.stddev.assign(X_train.cols(), 1.0);
  if (X_train.rows() == 0) return s;
  const double n = static_cast<double>(X_train.rows());
  for (std::size_t c = 0; c < X_train.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < X_train.rows(); ++r) sum += X_train(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < X_train.rows(); ++r) {
      const double d = X_train(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    s.mean[c] = mean;
    s.stddev[c] = sd < kMinStddev ? 1.0 : sd;
  }
  return s;
}

Matrix apply_normalize(const NormStats& stats, const Matrix& X) {
  if (X.cols() != stats.mean.size()) throw DimensionError("apply_normalize: column count mismatch");
  Matrix out = X;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = (out(r, c) - stats.mean[c]) / stats.stddev[c];
    }
  }
  return out;
}

Matrix invert_normalize(const NormStats& stats, const Matrix& Z) {
  if (Z.cols() != stats.mean.size()) throw DimensionError("invert_normalize: column count mismatch");
  Matrix out = Z;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = out(r, c) * stats.stddev[c] + stats.mean[c];
    }
  }
  return out;
}

Dataset synth_imbalanced(const SynthOptions& opts) {
  if (opts.d < 2) throw ParameterError("synth_imbalanced: d must be >= 2");
  Rng rng(opts.seed);
  const std::size_t n = opts.n_major + opts.n_minor;
  Matrix X(n, opts.d);
  std::vector<int> y(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const bool minor = r >= opts.n_major;
    for (std::size_t c = 0; c < opts.d; ++c) X(r, c) = rng.normal(0.0, opts.noise);
    if (minor) {
      y[r] = 1;
      const std::size_t mode = (r - opts.n_major) % 2;
      X(r, mode) += opts.separation;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  Dataset ds;
  ds.X = select_rows(X, order);
  for (std::size_t r : order) ds.y.push_back(y[r]);
  for (std::size_t c = 0; c < opts.d; ++c) ds.feature_names.push_back("x" + std::to_string(c));
  ds.source = "synth";
  return ds;
}

std::vector<Fold> stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("stratified_kfold: k must be >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k) {
    throw DegenerateDataError("stratified_kfold: each class needs at least " + std::to_string(k) +
                              " rows (have " + std::to_string(pos.size()) + " failures, " +
                              std::to_string(neg.size()) + " non-failures)");
  }
  Rng rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng.engine());
  std::shuffle(neg.begin(), neg.end(), rng.engine());

  std::vector<std::size_t> fold_of(y.size());
  for (std::size_t i = 0; i < pos.size(); ++i) fold_of[pos[i]] = i % k;
  // Continue the round robin where the positives stopped so fold sizes stay even.
  for (std::size_t i = 0; i < neg.size(); ++i) fold_of[neg[i]] = (pos.size() + i) % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

}  // namespace ganfp::data
