#include "ganfp/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ganfp/error.hpp"

namespace ganfp::ad {

namespace {

double evaluate(const GraphBuilder& f) {
  Graph g;
  NodeId loss = f(g);
  g.check_finite();
  const Matrix& v = g.value(loss);
  if (v.size() != 1) throw ContractError("grad_check: objective must be 1x1, got " + v.shape_string());
  return v[0];
}

}  // namespace

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

Matrix numeric_gradient(const GraphBuilder& f, const ParamRef& param, double step) {
  if (!(step > 0.0)) throw ParameterError("numeric_gradient: step must be positive");
  Matrix grad = Matrix::zeros_like(*param);
  for (std::size_t i = 0; i < param->size(); ++i) {
    const double original = (*param)[i];
    (*param)[i] = original + step;
    const double up = evaluate(f);
    (*param)[i] = original - step;
    const double down = evaluate(f);
    (*param)[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<Matrix> analytic_gradients(const GraphBuilder& f, std::span<const NamedParam> params) {
  Graph g;
  NodeId loss = f(g);
  g.check_finite();
  Gradients grads = g.backward(loss);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    out.push_back(grads.contains(p.value) ? grads.at(p.value) : Matrix::zeros_like(*p.value));
  }
  return out;
}

GradCheckReport compare_gradients(std::span<const NamedParam> params,
                                  std::span<const Matrix> analytic,
                                  std::span<const Matrix> numeric, double tol) {
  if (analytic.size() != params.size() || numeric.size() != params.size()) {
    throw ContractError("compare_gradients: gradient lists do not match the parameter list");
  }
  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!analytic[p].same_shape(numeric[p])) {
      throw DimensionError("compare_gradients: " + params[p].name + " shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = analytic[p][i];
      const double n = numeric[p][i];
      if (!std::isfinite(a) || !std::isfinite(n)) {
        throw NumericError("grad_check: non-finite gradient for " + params[p].name);
      }
      worst = std::max(worst, std::abs(a - n) / std::max(1.0, std::abs(n)));
    }
    report.entries.push_back({params[p].name, worst});
  }
  return report;
}

GradCheckReport grad_check(const GraphBuilder& f, std::span<const NamedParam> params, double step,
                           double tol) {
  if (!(step > 0.0)) throw ParameterError("grad_check: step must be positive");
  if (params.empty()) return GradCheckReport{{}, tol};
  std::vector<Matrix> analytic = analytic_gradients(f, params);
  std::vector<Matrix> numeric;
  numeric.reserve(params.size());
  for (const auto& p : params) numeric.push_back(numeric_gradient(f, p.value, step));
  return compare_gradients(params, analytic, numeric, tol);
}

}  // namespace ganfp::ad
