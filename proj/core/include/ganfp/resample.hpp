#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ganfp/matrix.hpp"

namespace ganfp::resample {

enum class Method { kUndersample, kSmote, kAdasyn };

struct ResamplePlan {
  Method method = Method::kSmote;
  std::size_t k_neighbors = 5;
  /// Desired minority/majority ratio after resampling, 1 = balanced.
  double target_ratio = 1.0;
  /// ADASYN balance level in (0, 1].
  double beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Resampled {
  Matrix X;
  std::vector<int> y;
};

struct ClassSplit {
  int minority_label = 1;
  std::vector<std::size_t> minority;
  std::vector<std::size_t> majority;
};

/// Partitions row indices by class; the smaller class is the minority (label
/// 1 on ties). Throws DegenerateDataError if a class is absent.
ClassSplit split_classes(std::span<const int> y);

/// Indices (into `candidates`) of the k nearest candidates to `query` by
/// Euclidean distance, skipping the candidate equal to `self`. Ties go to the
/// lower row index.
std::vector<std::size_t> nearest(const Matrix& X, std::span<const std::size_t> candidates,
                                 std::size_t query, std::size_t self, std::size_t k);

/// Keeps every minority row and draws round(target_ratio^-1 * n_min) majority
/// rows without replacement (capped at n_maj), then shuffles.
Resampled undersample(const Matrix& X, std::span<const int> y, std::uint64_t seed,
                      double target_ratio = 1.0);

/// Exactly `n_synthetic` rows, each x_i + u (x_nn - x_i) with u ~ U[0,1] and
/// x_nn one of the k nearest minority neighbours of seed row x_i. Seed rows
/// cycle through the minority class in order.
Matrix smote(const Matrix& X, std::span<const int> y, std::size_t k, std::size_t n_synthetic,
             std::uint64_t seed);

struct AdasynAllocation {
  std::vector<std::size_t> minority_rows;
  /// Fraction of majority rows among each minority row's k nearest
  /// neighbours in the full data.
  std::vector<double> difficulty;
  /// Synthetic rows generated from each minority row.
  std::vector<std::size_t> counts;
  /// round(beta * (n_maj - n_min)); equals the sum of counts.
  std::size_t total = 0;
  /// True when every difficulty was zero and uniform weights were used.
  bool uniform_fallback = false;
};

/// Per-row counts: round(weight * total). A rounding shortfall is added to the
/// highest-weight rows and a surplus removed from the lowest, so the counts
/// sum to `total`.
AdasynAllocation adasyn_allocation(const Matrix& X, std::span<const int> y, std::size_t k,
                                   double beta);

Matrix adasyn(const Matrix& X, std::span<const int> y, std::size_t k, double beta,
              std::uint64_t seed);

/// Runs the plan and returns the resampled training set. Oversampling methods
/// append synthetic minority rows after the original data.
Resampled apply_plan(const Matrix& X, std::span<const int> y, const ResamplePlan& plan);

}  // namespace ganfp::resample
