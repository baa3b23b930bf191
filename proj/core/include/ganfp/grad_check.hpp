#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ganfp/autodiff.hpp"

namespace ganfp::ad {

struct NamedParam {
  std::string name;
  ParamRef value;
};

/// Rebuilds the scalar objective from scratch on `graph`. Must be
/// deterministic and read parameters through `graph.parameter(...)`.
using GraphBuilder = std::function<NodeId(Graph&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_error() const;
  bool passed() const { return max_error() <= tolerance; }
};

/// Central differences with the given step, perturbing `param` in place and
/// restoring it afterwards.
Matrix numeric_gradient(const GraphBuilder& f, const ParamRef& param, double step);

/// Analytic gradient of every listed parameter, one backward pass.
std::vector<Matrix> analytic_gradients(const GraphBuilder& f, std::span<const NamedParam> params);

/// max |analytic - numeric| / max(1, |numeric|) per parameter.
GradCheckReport compare_gradients(std::span<const NamedParam> params,
                                  std::span<const Matrix> analytic,
                                  std::span<const Matrix> numeric, double tol);

GradCheckReport grad_check(const GraphBuilder& f, std::span<const NamedParam> params,
                           double step = 1e-6, double tol = 1e-5);

}  // namespace ganfp::ad
