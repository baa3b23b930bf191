#include "ganfp/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ganfp/error.hpp"
#include "ganfp/rng.hpp"

namespace ganfp::resample {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_inputs(const Matrix& X, std::span<const int> y) {
  if (X.rows() != y.size()) {
    throw DimensionError("resample: " + std::to_string(X.rows()) + " rows vs " +
                         std::to_string(y.size()) + " labels");
  }
}

void check_k(const ClassSplit& split, std::size_t k) {
  if (split.minority.size() < 2) {
    throw DegenerateDataError("resample: need at least 2 minority rows, have " +
                              std::to_string(split.minority.size()));
  }
  if (k == 0 || k > split.minority.size() - 1) {
    throw ParameterError("resample: k_neighbors=" + std::to_string(k) + " must be in [1, " +
                         std::to_string(split.minority.size() - 1) + "]");
  }
}

// One synthetic row on the segment from `from` to `to`.
void interpolate(const Matrix& X, std::size_t from, std::size_t to, double u,
                 std::span<double> out) {
  auto a = X.row(from);
  auto b = X.row(to);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = a[c] + u * (b[c] - a[c]);
}

// Synthetic rows from an explicit list of seed positions into split.minority.
Matrix synthesize(const Matrix& X, const ClassSplit& split, std::size_t k,
                  std::span<const std::size_t> seed_positions, Rng& rng) {
  std::vector<std::vector<std::size_t>> neighbours(split.minority.size());
  Matrix out(seed_positions.size(), X.cols());
  for (std::size_t j = 0; j < seed_positions.size(); ++j) {
    const std::size_t pos = seed_positions[j];
    auto& nn = neighbours[pos];
    if (nn.empty()) nn = nearest(X, split.minority, split.minority[pos], split.minority[pos], k);
    const std::size_t pick = nn[rng.index(nn.size())];
    const double u = rng.uniform();
    interpolate(X, split.minority[pos], split.minority[pick], u, out.row(j));
  }
  return out;
}

}  // namespace

void ResamplePlan::validate() const {
  if (k_neighbors < 1) throw ParameterError("ResamplePlan: k_neighbors must be >= 1");
  if (!(target_ratio > 0.0)) throw ParameterError("ResamplePlan: target_ratio must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("ResamplePlan: beta must be in (0, 1]");
}

ClassSplit split_classes(std::span<const int> y) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw DegenerateDataError("resample: both classes must be present (" +
                              std::to_string(pos.size()) + " failures, " +
                              std::to_string(neg.size()) + " non-failures)");
  }
  if (pos.size() <= neg.size()) return {1, std::move(pos), std::move(neg)};
  return {0, std::move(neg), std::move(pos)};
}

std::vector<std::size_t> nearest(const Matrix& X, std::span<const std::size_t> candidates,
                                 std::size_t query, std::size_t self, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == self) continue;
    dist.emplace_back(squared_distance(X.row(query), X.row(candidates[i])), i);
  }
  k = std::min(k, dist.size());
  auto cmp = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return candidates[a.second] < candidates[b.second];
  };
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end(), cmp);
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

Resampled undersample(const Matrix& X, std::span<const int> y, std::uint64_t seed,
                      double target_ratio) {
  check_inputs(X, y);
  if (!(target_ratio > 0.0)) throw ParameterError("undersample: target_ratio must be > 0");
  ClassSplit split = split_classes(y);
  Rng rng(seed);
  const auto wanted = static_cast<std::size_t>(
      std::llround(static_cast<double>(split.minority.size()) / target_ratio));
  const std::size_t keep = std::min(wanted, split.majority.size());
  std::shuffle(split.majority.begin(), split.majority.end(), rng.engine());

  std::vector<std::size_t> rows = split.minority;
  rows.insert(rows.end(), split.majority.begin(),
              split.majority.begin() + static_cast<std::ptrdiff_t>(keep));
  std::shuffle(rows.begin(), rows.end(), rng.engine());

  Resampled out;
  out.X = select_rows(X, rows);
  for (std::size_t r : rows) out.y.push_back(y[r]);
  return out;
}

Matrix smote(const Matrix& X, std::span<const int> y, std::size_t k, std::size_t n_synthetic,
             std::uint64_t seed) {
  check_inputs(X, y);
  const ClassSplit split = split_classes(y);
  check_k(split, k);
  std::vector<std::size_t> seeds(n_synthetic);
  for (std::size_t j = 0; j < n_synthetic; ++j) seeds[j] = j % split.minority.size();
  Rng rng(seed);
  return synthesize(X, split, k, seeds, rng);
}

AdasynAllocation adasyn_allocation(const Matrix& X, std::span<const int> y, std::size_t k,
                                   double beta) {
  check_inputs(X, y);
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("adasyn: beta must be in (0, 1]");
  const ClassSplit split = split_classes(y);
  check_k(split, k);

  AdasynAllocation alloc;
  alloc.minority_rows = split.minority;
  alloc.total = static_cast<std::size_t>(std::llround(
      beta * static_cast<double>(split.majority.size() - split.minority.size())));

  std::vector<std::size_t> everyone(y.size());
  std::iota(everyone.begin(), everyone.end(), 0);
  double sum = 0.0;
  for (std::size_t row : split.minority) {
    const auto nn = nearest(X, everyone, row, row, k);
    std::size_t majority = 0;
    for (std::size_t idx : nn) majority += y[everyone[idx]] != split.minority_label ? 1 : 0;
    const double r = static_cast<double>(majority) / static_cast<double>(k);
    alloc.difficulty.push_back(r);
    sum += r;
  }

  const std::size_t n = split.minority.size();
  std::vector<double> weight(n);
  alloc.uniform_fallback = sum == 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = alloc.uniform_fallback ? 1.0 / static_cast<double>(n) : alloc.difficulty[i] / sum;
  }

  alloc.counts.resize(n);
  long long assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    alloc.counts[i] =
        static_cast<std::size_t>(std::llround(weight[i] * static_cast<double>(alloc.total)));
    assigned += static_cast<long long>(alloc.counts[i]);
  }

  // A shortfall goes to the highest weights first, a surplus comes off the
  // lowest; lower index wins ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
  long long residue = static_cast<long long>(alloc.total) - assigned;
  for (std::size_t step = 0; residue > 0; ++step, --residue) ++alloc.counts[order[step % n]];
  for (std::size_t step = 0; residue < 0; ++step) {
    const std::size_t i = order[n - 1 - step % n];
    if (alloc.counts[i] > 0) {
      --alloc.counts[i];
      ++residue;
    }
  }
  return alloc;
}

Matrix adasyn(const Matrix& X, std::span<const int> y, std::size_t k, double beta,
              std::uint64_t seed) {
  const AdasynAllocation alloc = adasyn_allocation(X, y, k, beta);
  const ClassSplit split = split_classes(y);
  std::vector<std::size_t> seeds;
  seeds.reserve(alloc.total);
  for (std::size_t i = 0; i < alloc.counts.size(); ++i) seeds.insert(seeds.end(), alloc.counts[i], i);
  Rng rng(seed);
  return synthesize(X, split, k, seeds, rng);
}

Resampled apply_plan(const Matrix& X, std::span<const int> y, const ResamplePlan& plan) {
  plan.validate();
  check_inputs(X, y);
  if (plan.method == Method::kUndersample) return undersample(X, y, plan.seed, plan.target_ratio);

  const ClassSplit split = split_classes(y);
  Matrix synthetic;
  if (plan.method == Method::kSmote) {
    const auto wanted = static_cast<std::size_t>(
        std::llround(plan.target_ratio * static_cast<double>(split.majority.size())));
    const std::size_t n_synth = wanted > split.minority.size() ? wanted - split.minority.size() : 0;
    synthetic = smote(X, y, plan.k_neighbors, n_synth, plan.seed);
  } else {
    synthetic = adasyn(X, y, plan.k_neighbors, plan.beta, plan.seed);
  }
  Resampled out;
  out.X = vstack(X, synthetic);
  out.y.assign(y.begin(), y.end());
  out.y.insert(out.y.end(), synthetic.rows(), split.minority_label);
  return out;
}

}  // namespace ganfp::resample
