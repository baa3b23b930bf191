#include "ganfp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ganfp/csv.hpp"
#include "ganfp/error.hpp"

namespace ganfp::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) {
  if (p == r) return p;
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

void check_lengths(std::span<const int> y, std::span<const double> s) {
  if (y.size() != s.size()) {
    throw DimensionError("metrics: " + std::to_string(y.size()) + " labels vs " +
                         std::to_string(s.size()) + " scores");
  }
}

}  // namespace

Confusion confusion(std::span<const int> y_true, std::span<const double> scores,
                    double threshold) {
  check_lengths(y_true, scores);
  Confusion c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw ParameterError("confusion: score outside [0,1] at index " + std::to_string(i));
    }
    const bool predicted = scores[i] >= threshold;
    const bool actual = y_true[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Prf prf(const Confusion& c, int positive_label) {
  // For the non-failure class the roles of the counts swap.
  const std::size_t tp = positive_label == 1 ? c.tp : c.tn;
  const std::size_t fp = positive_label == 1 ? c.fp : c.fn;
  const std::size_t fn = positive_label == 1 ? c.fn : c.fp;
  Prf out;
  out.precision = ratio(tp, tp + fp);
  out.recall = ratio(tp, tp + fn);
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

Prf macro_prf(const Confusion& c) {
  const Prf pos = prf(c, 1);
  const Prf neg = prf(c, 0);
  return {(pos.precision + neg.precision) / 2.0, (pos.recall + neg.recall) / 2.0,
          (pos.f1 + neg.f1) / 2.0};
}

Prf micro_prf(const Confusion& c) {
  // Pooled: sum of per-class true positives over sum of per-class predictions.
  const std::size_t tp = c.tp + c.tn;
  const std::size_t fp = c.fp + c.fn;
  const std::size_t fn = c.fn + c.fp;
  Prf out;
  out.precision = ratio(tp, tp + fp);
  out.recall = ratio(tp, tp + fn);
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

double pr_auc(std::span<const int> y_true, std::span<const double> scores) {
  check_lengths(y_true, scores);
  const auto positives = static_cast<std::size_t>(std::count(y_true.begin(), y_true.end(), 1));
  if (positives == 0) throw MetricError("pr_auc: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double auc = 0.0;
  double prev_recall = 0.0;
  double prev_precision = -1.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (y_true[order[i]] == 1) ++tp;
      else ++fp;
      ++i;
    }
    const double precision = ratio(tp, tp + fp);
    const double recall = ratio(tp, positives);
    if (prev_precision < 0.0) prev_precision = precision;
    auc += (recall - prev_recall) * (precision + prev_precision) / 2.0;
    prev_recall = recall;
    prev_precision = precision;
  }
  return auc;
}

MetricsReport evaluate(std::span<const int> y_true, std::span<const double> scores,
                       double threshold) {
  const Confusion c = confusion(y_true, scores, threshold);
  MetricsReport r;
  r.auc = pr_auc(y_true, scores);
  r.macro = macro_prf(c);
  r.micro = micro_prf(c);
  r.failure = prf(c, 1);
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  std::vector<double> acc(report_columns().size(), 0.0);
  for (const auto& r : reports) {
    auto v = report_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
  }
  for (double& v : acc) v /= static_cast<double>(reports.size());
  m.auc = acc[0];
  m.macro = {acc[1], acc[2], acc[3]};
  m.micro = {acc[4], acc[5], acc[6]};
  m.failure = {acc[7], acc[8], acc[9]};
  return m;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "auc",       "macro_precision",   "macro_recall",   "macro_f1",
      "micro_precision", "micro_recall", "micro_f1",      "failure_precision",
      "failure_recall",  "failure_f1"};
  return cols;
}

std::vector<double> report_values(const MetricsReport& r) {
  return {r.auc,           r.macro.precision, r.macro.recall,   r.macro.f1,
          r.micro.precision, r.micro.recall,  r.micro.f1,       r.failure.precision,
          r.failure.recall,  r.failure.f1};
}

std::string report_csv(const MetricsReport& r) {
  std::string out;
  for (double v : report_values(r)) {
    if (!out.empty()) out += ',';
    out += csv::format(v);
  }
  return out;
}

}  // namespace ganfp::metrics
