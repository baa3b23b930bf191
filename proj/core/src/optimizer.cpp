#include "ganfp/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "ganfp/error.hpp"

namespace ganfp::nn {

namespace {

std::vector<ad::ParamRef> unique_params(std::span<const ad::ParamRef> params) {
  std::vector<ad::ParamRef> out;
  for (const auto& p : params) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

void check_gradients(std::span<const ad::ParamRef> params, const ad::Gradients& grads) {
  for (const auto& p : params) {
    if (!grads.contains(p)) continue;
    const Matrix& g = grads.at(p);
    if (!g.same_shape(*p)) throw DimensionError("optimizer: gradient shape does not match parameter");
    if (!all_finite(g)) throw NumericError("optimizer: non-finite gradient");
  }
}

void check_rate(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ParameterError("optimizer: learning rate must be finite and >= 0");
  }
}

}  // namespace

void sgd_step(std::span<const ad::ParamRef> params, const ad::Gradients& grads, double lr,
              Direction direction) {
  check_rate(lr);
  const auto unique = unique_params(params);
  check_gradients(unique, grads);
  const double sign = direction == Direction::kDescend ? -1.0 : 1.0;
  for (const auto& p : unique) {
    if (!grads.contains(p)) continue;
    const Matrix& g = grads.at(p);
    for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] += sign * lr * g[i];
  }
}

void adam_step(std::span<const ad::ParamRef> params, const ad::Gradients& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps, Direction direction) {
  check_rate(lr);
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw ParameterError("adam: need 0 <= beta < 1 and eps > 0");
  }
  const auto unique = unique_params(params);
  check_gradients(unique, grads);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  const double sign = direction == Direction::kDescend ? -1.0 : 1.0;
  for (const auto& p : unique) {
    auto [it, inserted] = state.moments.try_emplace(p.get());
    if (inserted) {
      it->second.m = Matrix::zeros_like(*p);
      it->second.v = Matrix::zeros_like(*p);
    }
    Matrix& m = it->second.m;
    Matrix& v = it->second.v;
    const Matrix* g = grads.contains(p) ? &grads.at(p) : nullptr;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
      v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      (*p)[i] += sign * lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<ad::ParamRef> params)
    : config_(config), params_(unique_params(params)) {}

void Optimizer::step(const ad::Gradients& grads, Direction direction) {
  switch (config_.kind) {
    case OptimizerKind::kSgd:
      sgd_step(params_, grads, config_.lr, direction);
      break;
    case OptimizerKind::kAdam:
      adam_step(params_, grads, adam_, config_.lr, config_.beta1, config_.beta2, config_.eps,
                direction);
      break;
  }
}

}  // namespace ganfp::nn
