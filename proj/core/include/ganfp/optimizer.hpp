#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "ganfp/autodiff.hpp"

namespace ganfp::nn {

enum class Direction { kDescend, kAscend };

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  struct Moments {
    Matrix m;
    Matrix v;
  };
  std::unordered_map<const Matrix*, Moments> moments;
  std::size_t step = 0;
};

/// p <- p -/+ lr * g. Storage listed twice is still updated once. Parameters
/// absent from `grads` are left alone. Throws NumericError on a non-finite
/// gradient before touching anything.
void sgd_step(std::span<const ad::ParamRef> params, const ad::Gradients& grads, double lr,
              Direction direction);

/// Bias-corrected Adam. Parameters absent from `grads` see a zero gradient.
void adam_step(std::span<const ad::ParamRef> params, const ad::Gradients& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps, Direction direction);

/// A fixed parameter set with its own optimizer state.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerConfig config, std::vector<ad::ParamRef> params);

  void step(const ad::Gradients& grads, Direction direction);
  const OptimizerConfig& config() const { return config_; }
  std::span<const ad::ParamRef> params() const { return params_; }

 private:
  OptimizerConfig config_;
  std::vector<ad::ParamRef> params_;
  AdamState adam_;
};

}  // namespace ganfp::nn
