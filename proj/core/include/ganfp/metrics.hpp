#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ganfp::metrics {

/// Failure (label 1) is the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline constexpr double kDefaultThreshold = 0.5;

/// Predicts failure iff score >= threshold. Scores must lie in [0, 1].
Confusion confusion(std::span<const int> y_true, std::span<const double> scores,
                    double threshold = kDefaultThreshold);

/// Precision/recall/F1 treating `positive_label` (0 or 1) as the positive
/// class. 0/0 is reported as 0.
Prf prf(const Confusion& c, int positive_label);
/// Unweighted mean of the two per-class triples.
Prf macro_prf(const Confusion& c);
/// Pooled over both classes; all three equal accuracy for binary labels.
Prf micro_prf(const Confusion& c);

/// Area under the precision-recall curve. Thresholds sweep the distinct
/// scores in descending order (tied scores enter together); the curve is
/// anchored at recall 0 with the first point's precision and integrated with
/// the trapezoid rule. Throws MetricError without positives.
double pr_auc(std::span<const int> y_true, std::span<const double> scores);

struct MetricsReport {
  double auc = 0.0;
  Prf macro;
  Prf micro;
  Prf failure;
};

MetricsReport evaluate(std::span<const int> y_true, std::span<const double> scores,
                       double threshold = kDefaultThreshold);

/// Field-wise mean.
MetricsReport mean_report(std::span<const MetricsReport> reports);

/// auc, macro P/R/F1, micro P/R/F1, failure P/R/F1.
const std::vector<std::string>& report_columns();
std::vector<double> report_values(const MetricsReport& r);
/// Values of report_values joined with commas.
std::string report_csv(const MetricsReport& r);

}  // namespace ganfp::metrics
