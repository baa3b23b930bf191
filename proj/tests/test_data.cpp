#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ganfp/data.hpp"
#include "ganfp/error.hpp"
#include "support/oracles.hpp"

using namespace ganfp;
using namespace ganfp::data;

namespace {

std::string cmapss_row(int engine, int cycle, double base) {
  std::ostringstream os;
  os << engine << ' ' << cycle;
  for (std::size_t j = 0; j < kCmapssSettings + kCmapssSensors; ++j) os << ' ' << base + static_cast<double>(j);
  os << '\n';
  return os.str();
}

std::vector<EngineSeries> fake_fleet(const std::vector<int>& lengths) {
  std::string text;
  for (std::size_t e = 0; e < lengths.size(); ++e) {
    for (int c = 1; c <= lengths[e]; ++c) {
      // Encode engine and cycle in the readings so windows can be traced.
      text += cmapss_row(static_cast<int>(e) + 1, c, 1000.0 * static_cast<double>(e + 1) + c);
    }
  }
  std::istringstream in(text);
  return parse_cmapss(in);
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("ganfp_test_" + name);
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("parse_cmapss") {
  std::istringstream two(cmapss_row(1, 1, 0.5) + cmapss_row(1, 2, 0.25));
  const auto series = parse_cmapss(two);
  REQUIRE(series.size() == 1);
  CHECK(series[0].engine_id == 1);
  CHECK(series[0].length() == 2);
  CHECK(series[0].cycles == std::vector<int>{1, 2});
  CHECK(series[0].settings[1][0] == 0.25);
  CHECK(series[0].sensors[0][0] == 3.5);
  CHECK(series[0].sensors[1][20] == 23.25);

  // Engines come back ordered by id even when interleaved.
  std::istringstream mixed(cmapss_row(2, 1, 0) + cmapss_row(1, 1, 0) + cmapss_row(2, 2, 0));
  const auto ordered = parse_cmapss(mixed);
  REQUIRE(ordered.size() == 2);
  CHECK(ordered[0].engine_id == 1);
  CHECK(ordered[1].length() == 2);

  std::istringstream short_row("1 1 0 0 0\n");
  CHECK_THROWS_AS(parse_cmapss(short_row), FormatError);
  std::string wide = cmapss_row(1, 1, 0);
  wide.insert(wide.size() - 1, " 7");
  std::istringstream wide_in(wide);
  CHECK_THROWS_AS(parse_cmapss(wide_in), FormatError);

  std::string bad = cmapss_row(1, 1, 0) + cmapss_row(1, 2, 0);
  bad.replace(bad.rfind(" 5"), 2, " x");
  std::istringstream bad_in(bad);
  try {
    parse_cmapss(bad_in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::istringstream gap(cmapss_row(1, 1, 0) + cmapss_row(1, 3, 0));
  CHECK_THROWS_AS(parse_cmapss(gap), ParseError);
  CHECK_THROWS_AS(load_cmapss("/nonexistent/train_FD001.txt"), FormatError);
}

TEST_CASE("window_cmapss") {
  SUBCASE("counts and width") {
    const auto fleet = fake_fleet({15, 40, 9, 100});
    const Dataset ds = window_cmapss(fleet);
    CHECK(ds.dim() == 315);
    CHECK(ds.feature_names.size() == 315);
    CHECK(ds.rows() == 1 + 26 + 0 + 86);

    const Dataset exact = window_cmapss(fake_fleet({15}));
    CHECK(exact.rows() == 1);
    CHECK(exact.y == std::vector<int>{1});

    WindowOptions strided;
    strided.stride = 5;
    CHECK(window_cmapss(fake_fleet({40}), strided).rows() == 6);
    strided.stride = 0;
    CHECK_THROWS_AS(window_cmapss(fleet, strided), ParameterError);
  }

  SUBCASE("layout, labels and engine boundaries") {
    const auto fleet = fake_fleet({30, 50});
    const Dataset ds = window_cmapss(fleet);
    std::size_t failures = 0;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      // Sensor 0 of cycle c in engine e reads 1000e + c + 3.
      const double first = ds.X(r, 0) - 3.0;
      const int engine = static_cast<int>(first / 1000.0);
      const int cycle0 = static_cast<int>(first) - 1000 * engine;
      for (std::size_t t = 0; t < 15; ++t) {
        for (std::size_t s = 0; s < 21; ++s) {
          CHECK(ds.X(r, t * 21 + s) == 1000.0 * engine + cycle0 + static_cast<double>(t) + 3.0 + s);
        }
      }
      const int last = cycle0 + 14;
      const int final_cycle = engine == 1 ? 30 : 50;
      CHECK(last <= final_cycle);
      CHECK(ds.y[r] == (final_cycle - last < 20 ? 1 : 0));
      failures += static_cast<std::size_t>(ds.y[r]);
    }
    // All 16 windows of the short engine, the last 20 of the long one.
    CHECK(failures == 36);
  }

  SUBCASE("wider horizon never loses failures") {
    const auto fleet = fake_fleet({20, 35, 61, 90});
    std::size_t prev = 0;
    for (std::size_t h = 0; h <= 100; h += 5) {
      WindowOptions o;
      o.fail_horizon = h;
      const Dataset ds = window_cmapss(fleet, o);
      const std::size_t n = ds.count(1);
      CHECK(n >= prev);
      prev = n;
    }
    CHECK(prev == window_cmapss(fleet).rows());
  }
}

TEST_CASE("load_aps and median imputation") {
  const auto path = write_temp("aps.csv",
                               "class,aa_000,ab_000\n"
                               "neg,1,10\n"
                               "pos,na,30\n"
                               "neg,3,na\n");
  Dataset ds = load_aps(path.string());
  CHECK(ds.y == std::vector<int>{0, 1, 0});
  CHECK(ds.feature_names == std::vector<std::string>{"aa_000", "ab_000"});
  CHECK(std::isnan(ds.X(1, 0)));
  const MedianImputer imp = fit_median_imputer(ds.X);
  CHECK(imp.medians == std::vector<double>{2.0, 20.0});
  imp.apply(ds.X);
  CHECK(ds.X(1, 0) == 2.0);
  CHECK(ds.X(2, 1) == 20.0);

  // Medians restricted to training rows ignore the rest.
  Matrix M{{1.0}, {5.0}, {100.0}};
  const std::vector<std::size_t> train{0, 1};
  CHECK(fit_median_imputer(M, train).medians == std::vector<double>{3.0});
  Matrix missing(2, 1, std::nan(""));
  CHECK(fit_median_imputer(missing).medians == std::vector<double>{0.0});

  // The public file opens with a license block.
  const auto preamble = write_temp("aps_pre.csv",
                                   "This file is part of a data set.\n"
                                   "Copyright, see the license.\n"
                                   "\n"
                                   "class,aa_000\n"
                                   "pos,4\n");
  const Dataset pre = load_aps(preamble.string());
  CHECK(pre.y == std::vector<int>{1});
  CHECK(pre.X(0, 0) == 4.0);
  std::filesystem::remove(preamble);

  const auto no_class = write_temp("aps_bad.csv", "label,aa_000\nneg,1\n");
  CHECK_THROWS_AS(load_aps(no_class.string()), FormatError);
  const auto bad_class = write_temp("aps_bad2.csv", "class,aa_000\nmaybe,1\n");
  CHECK_THROWS_AS(load_aps(bad_class.string()), ParseError);
  std::filesystem::remove(path);
  std::filesystem::remove(no_class);
  std::filesystem::remove(bad_class);
}

TEST_CASE("labeled csv round trip") {
  Rng rng(5);
  Dataset ds;
  ds.X = oracle::random_matrix(rng, 6, 3);
  ds.y = {0, 1, 0, 0, 1, 1};
  ds.feature_names = {"a", "b", "c"};
  std::ostringstream os;
  write_labeled_csv(os, ds);
  const auto path = write_temp("labeled.csv", os.str());
  const Dataset back = load_labeled_csv(path.string());
  CHECK(back.X == ds.X);
  CHECK(back.y == ds.y);
  CHECK(back.feature_names == ds.feature_names);
  std::filesystem::remove(path);
}

TEST_CASE("normalization") {
  Rng rng(9);
  Matrix X = oracle::random_matrix(rng, 40, 4, -5.0, 20.0);
  for (std::size_t i = 0; i < X.rows(); ++i) X(i, 2) = 7.5;
  const NormStats stats = fit_normalize(X);
  CHECK(stats.stddev[2] == 1.0);
  const Matrix Z = apply_normalize(stats, X);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < Z.rows(); ++i) mean += Z(i, j);
    mean /= 40.0;
    for (std::size_t i = 0; i < Z.rows(); ++i) sq += (Z(i, j) - mean) * (Z(i, j) - mean);
    CHECK(std::abs(mean) <= 1e-9);
    if (j == 2) {
      CHECK(sq == 0.0);
    } else {
      CHECK(std::abs(std::sqrt(sq / 40.0) - 1.0) <= 1e-9);
    }
  }
  const Matrix back = invert_normalize(stats, Z);
  for (std::size_t i = 0; i < X.size(); ++i) CHECK(std::abs(back[i] - X[i]) <= 1e-9);

  // Stats fit on training rows do not move when test rows change.
  Matrix train(30, 4), full = X;
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 4; ++j) train(i, j) = X(i, j);
  }
  const NormStats before = fit_normalize(train);
  for (std::size_t i = 30; i < 40; ++i) full(i, 0) = 1e6;
  Matrix train_again(30, 4);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 4; ++j) train_again(i, j) = full(i, j);
  }
  CHECK(fit_normalize(train_again).mean == before.mean);
  CHECK(fit_normalize(train_again).stddev == before.stddev);

  CHECK_THROWS_AS(apply_normalize(stats, Matrix(2, 3)), DimensionError);
}

TEST_CASE("synth_imbalanced") {
  SynthOptions o;
  o.seed = 3;
  const Dataset ds = synth_imbalanced(o);
  CHECK(ds.rows() == 5100);
  CHECK(ds.dim() == 20);
  CHECK(ds.count(1) == 100);
  CHECK(ds.count(0) == 5000);
  const Dataset again = synth_imbalanced(o);
  CHECK(again.X == ds.X);
  CHECK(again.y == ds.y);
  o.seed = 4;
  CHECK_FALSE(synth_imbalanced(o).X == ds.X);

  o.d = 1;
  CHECK_THROWS_AS(synth_imbalanced(o), ParameterError);

  // Nearest-centroid accuracy on fresh data climbs toward 1 with separation.
  double prev = 0.0;
  for (double sep : {0.5, 2.0, 4.0, 8.0, 16.0}) {
    SynthOptions s;
    s.n_major = 2000;
    s.n_minor = 400;
    s.d = 5;
    s.separation = sep;
    s.seed = 10;
    const Dataset fit = synth_imbalanced(s);
    s.seed = 11;
    const Dataset eval = synth_imbalanced(s);
    std::vector<double> c0(5, 0.0), c1(5, 0.0);
    for (std::size_t i = 0; i < fit.rows(); ++i) {
      auto& c = fit.y[i] == 1 ? c1 : c0;
      for (std::size_t j = 0; j < 5; ++j) c[j] += fit.X(i, j);
    }
    for (std::size_t j = 0; j < 5; ++j) {
      c0[j] /= 2000.0;
      c1[j] /= 400.0;
    }
    // The minority is bimodal, so match against each mode's centroid.
    std::vector<double> m1(5, 0.0), m2(5, 0.0);
    std::size_t n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < fit.rows(); ++i) {
      if (fit.y[i] != 1) continue;
      const bool first = fit.X(i, 0) > fit.X(i, 1);
      auto& m = first ? m1 : m2;
      (first ? n1 : n2)++;
      for (std::size_t j = 0; j < 5; ++j) m[j] += fit.X(i, j);
    }
    for (std::size_t j = 0; j < 5; ++j) {
      m1[j] /= static_cast<double>(n1);
      m2[j] /= static_cast<double>(n2);
    }
    auto dist = [&](std::size_t i, const std::vector<double>& c) {
      double s2 = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s2 += std::pow(eval.X(i, j) - c[j], 2);
      return s2;
    };
    std::size_t correct = 0;
    for (std::size_t i = 0; i < eval.rows(); ++i) {
      const int pred = std::min(dist(i, m1), dist(i, m2)) < dist(i, c0) ? 1 : 0;
      correct += pred == eval.y[i] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(eval.rows());
    CHECK(acc >= prev - 0.01);
    prev = acc;
  }
  CHECK(prev >= 0.999);
}

TEST_CASE("stratified_kfold") {
  std::vector<int> y(50, 0);
  for (std::size_t i = 0; i < 10; ++i) y[i * 5] = 1;
  const auto folds = stratified_kfold(y, 5, 42);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> seen;
  for (const Fold& f : folds) {
    std::size_t ones = 0;
    for (std::size_t i : f.test) {
      ones += static_cast<std::size_t>(y[i]);
      CHECK(seen.insert(i).second);
    }
    CHECK(ones == 2);
    CHECK(f.test.size() == 10);
    CHECK(std::is_sorted(f.test.begin(), f.test.end()));
    CHECK(std::is_sorted(f.train.begin(), f.train.end()));
    // Train is exactly the complement of test.
    std::vector<std::size_t> both;
    std::set_union(f.train.begin(), f.train.end(), f.test.begin(), f.test.end(),
                   std::back_inserter(both));
    CHECK(both.size() == 50);
    CHECK(f.train.size() + f.test.size() == 50);
  }
  CHECK(seen.size() == 50);

  SUBCASE("ratios stay within one sample") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 30 + rng.index(200);
      std::vector<int> labels(n, 0);
      std::size_t pos = 0;
      for (int& v : labels) {
        v = rng.uniform() < 0.15 ? 1 : 0;
        pos += static_cast<std::size_t>(v);
      }
      if (pos < 5 || n - pos < 5) continue;
      for (const Fold& f : stratified_kfold(labels, 5, static_cast<std::uint64_t>(trial))) {
        std::size_t fp = 0;
        for (std::size_t i : f.test) fp += static_cast<std::size_t>(labels[i]);
        CHECK(std::abs(static_cast<double>(fp) - static_cast<double>(pos) / 5.0) < 1.0);
        CHECK(std::abs(static_cast<double>(f.test.size() - fp) - static_cast<double>(n - pos) / 5.0) <
              1.0);
      }
    }
  }

  CHECK(stratified_kfold(y, 5, 42)[3].test == folds[3].test);
  CHECK_FALSE(stratified_kfold(y, 5, 43)[0].test == folds[0].test);
  std::vector<int> few(20, 0);
  few[0] = few[1] = few[2] = 1;
  CHECK_THROWS_AS(stratified_kfold(few, 5, 0), DegenerateDataError);
}
