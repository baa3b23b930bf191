#include "ganfp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ganfp/error.hpp"

namespace ganfp::ad {

namespace {

void require_same_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

double sigmoid_scalar(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// c += a * b
void gemm_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// da += dc * b^T
void accumulate_grad_left(const Matrix& dc, const Matrix& b, Matrix& da) {
  const std::size_t n = dc.rows(), m = dc.cols(), k = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* dcrow = dc.row(i).data();
    double* darow = da.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.row(p).data();
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += dcrow[j] * brow[j];
      darow[p] += s;
    }
  }
}

// db += a^T * dc
void accumulate_grad_right(const Matrix& a, const Matrix& dc, Matrix& db) {
  const std::size_t n = a.rows(), k = a.cols(), m = dc.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    const double* dcrow = dc.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* dbrow = db.row(p).data();
      for (std::size_t j = 0; j < m; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

Graph::Node make_node(Op op, Matrix value, std::initializer_list<NodeId> inputs) {
  Graph::Node n;
  n.op = op;
  n.value = std::move(value);
  n.arity = inputs.size();
  std::size_t i = 0;
  for (NodeId id : inputs) n.inputs[i++] = id.index;
  return n;
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kAddBiasRowwise: return "add_bias_rowwise";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kNeg: return "neg";
    case Op::kMulElem: return "mul_elem";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kSub: return "sub";
    case Op::kSquare: return "square";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kMeanAll: return "mean_all";
    case Op::kSumAll: return "sum_all";
  }
  return "unknown";
}

const Matrix& Gradients::at(const ParamRef& p) const {
  auto it = grads_.find(p.get());
  if (it == grads_.end()) throw ContractError("Gradients: parameter not part of the graph");
  return it->second;
}

NodeId Graph::push(Node node) {
  for (std::size_t i = 0; i < node.arity; ++i) {
    if (node.inputs[i] >= nodes_.size()) throw ContractError("Graph: input id out of range");
  }
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::constant(Matrix value) { return push(make_node(Op::kConstant, std::move(value), {})); }

NodeId Graph::parameter(const ParamRef& storage) {
  if (!storage) throw ContractError("Graph::parameter: null storage");
  if (auto it = param_nodes_.find(storage.get()); it != param_nodes_.end()) {
    return NodeId{it->second};
  }
  Node n = make_node(Op::kParameter, *storage, {});
  n.storage = storage;
  NodeId id = push(std::move(n));
  param_nodes_.emplace(storage.get(), id.index);
  return id;
}

void Graph::check_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!all_finite(nodes_[i].value)) {
      throw NumericError("non-finite value at node " + std::to_string(i) + " (" +
                         std::string(op_name(nodes_[i].op)) + ")");
    }
  }
}

Gradients Graph::backward(NodeId loss) {
  if (loss.index >= nodes_.size()) throw ContractError("backward: loss id out of range");
  const Matrix& lv = nodes_[loss.index].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  if (!std::isfinite(lv[0])) throw ContractError("backward: loss value is not finite");

  for (Node& n : nodes_) n.grad = Matrix::zeros_like(n.value);
  nodes_[loss.index].grad[0] = 1.0;

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    const Matrix& g = n.grad;
    auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };

    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatmul:
        accumulate_grad_left(g, in(1).value, in(0).grad);
        accumulate_grad_right(in(0).value, g, in(1).grad);
        break;
      case Op::kAdd:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in(0).grad[i] += g[i];
          in(1).grad[i] += g[i];
        }
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < g.size(); ++i) {
          in(0).grad[i] += g[i];
          in(1).grad[i] -= g[i];
        }
        break;
      case Op::kAddBiasRowwise: {
        Matrix& ga = in(0).grad;
        Matrix& gb = in(1).grad;
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) {
            ga(r, c) += g(r, c);
            gb(0, c) += g(r, c);
          }
        }
        break;
      }
      case Op::kRelu: {
        const Matrix& a = in(0).value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > 0.0) in(0).grad[i] += g[i];
        }
        break;
      }
      case Op::kSigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.value[i];
          in(0).grad[i] += g[i] * s * (1.0 - s);
        }
        break;
      case Op::kLog: {
        const Matrix& a = in(0).value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a[i] > n.scalar) in(0).grad[i] += g[i] / a[i];
        }
        break;
      }
      case Op::kNeg:
        for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] -= g[i];
        break;
      case Op::kMulElem: {
        const Matrix& a = in(0).value;
        const Matrix& b = in(1).value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          in(0).grad[i] += g[i] * b[i];
          in(1).grad[i] += g[i] * a[i];
        }
        break;
      }
      case Op::kMulScalar:
        for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += g[i] * n.scalar;
        break;
      case Op::kSquare: {
        const Matrix& a = in(0).value;
        for (std::size_t i = 0; i < g.size(); ++i) in(0).grad[i] += 2.0 * a[i] * g[i];
        break;
      }
      case Op::kConcatCols: {
        Matrix& ga = in(0).grad;
        Matrix& gb = in(1).grad;
        const std::size_t ca = ga.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
          for (std::size_t c = 0; c < gb.cols(); ++c) gb(r, c) += g(r, ca + c);
        }
        break;
      }
      case Op::kSliceCols: {
        Matrix& ga = in(0).grad;
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, n.offset + c) += g(r, c);
        }
        break;
      }
      case Op::kMeanAll: {
        Matrix& ga = in(0).grad;
        const double share = g[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += share;
        break;
      }
      case Op::kSumAll: {
        Matrix& ga = in(0).grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
    }
  }

  Gradients out;
  for (const Node& n : nodes_) {
    if (n.op == Op::kParameter) out.set(n.storage, n.grad);
  }
  return out;
}

NodeId matmul(Graph& g, NodeId a, NodeId b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + av.shape_string() + " vs " +
                         bv.shape_string());
  }
  Matrix out(av.rows(), bv.cols());
  gemm_accumulate(av, bv, out);
  return g.push(make_node(Op::kMatmul, std::move(out), {a, b}));
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  require_same_shape("add", g.value(a), g.value(b));
  return g.push(make_node(Op::kAdd, zip(g.value(a), g.value(b), std::plus<>{}), {a, b}));
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  require_same_shape("sub", g.value(a), g.value(b));
  return g.push(make_node(Op::kSub, zip(g.value(a), g.value(b), std::minus<>{}), {a, b}));
}

NodeId mul_elem(Graph& g, NodeId a, NodeId b) {
  require_same_shape("mul_elem", g.value(a), g.value(b));
  return g.push(
      make_node(Op::kMulElem, zip(g.value(a), g.value(b), std::multiplies<>{}), {a, b}));
}

NodeId add_bias_rowwise(Graph& g, NodeId a, NodeId bias) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_bias_rowwise: bias must be 1x" + std::to_string(av.cols()) +
                         ", got " + bv.shape_string() + " for input " + av.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  }
  return g.push(make_node(Op::kAddBiasRowwise, std::move(out), {a, bias}));
}

NodeId relu(Graph& g, NodeId a) {
  return g.push(make_node(Op::kRelu, map(g.value(a), [](double x) { return x > 0.0 ? x : 0.0; }),
                          {a}));
}

NodeId sigmoid(Graph& g, NodeId a) {
  return g.push(make_node(Op::kSigmoid, map(g.value(a), sigmoid_scalar), {a}));
}

NodeId log(Graph& g, NodeId a, double eps) {
  if (!(eps > 0.0)) throw ContractError("log: eps must be positive");
  Graph::Node n =
      make_node(Op::kLog, map(g.value(a), [eps](double x) { return std::log(std::max(x, eps)); }),
                {a});
  n.scalar = eps;
  return g.push(std::move(n));
}

NodeId neg(Graph& g, NodeId a) {
  return g.push(make_node(Op::kNeg, map(g.value(a), [](double x) { return -x; }), {a}));
}

NodeId mul_scalar(Graph& g, NodeId a, double k) {
  Graph::Node n = make_node(Op::kMulScalar, map(g.value(a), [k](double x) { return k * x; }), {a});
  n.scalar = k;
  return g.push(std::move(n));
}

NodeId square(Graph& g, NodeId a) {
  return g.push(make_node(Op::kSquare, map(g.value(a), [](double x) { return x * x; }), {a}));
}

NodeId concat_cols(Graph& g, NodeId a, NodeId b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: row counts differ " + av.shape_string() + " vs " +
                         bv.shape_string());
  }
  return g.push(make_node(Op::kConcatCols, hstack(av, bv), {a, b}));
}

NodeId slice_cols(Graph& g, NodeId a, std::size_t begin, std::size_t count) {
  const Matrix& av = g.value(a);
  if (begin + count > av.cols() || count == 0) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         av.shape_string());
  }
  Matrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  }
  Graph::Node n = make_node(Op::kSliceCols, std::move(out), {a});
  n.offset = begin;
  return g.push(std::move(n));
}

NodeId mean_all(Graph& g, NodeId a) {
  const Matrix& av = g.value(a);
  if (av.empty()) throw DimensionError("mean_all: empty input");
  double s = 0.0;
  for (double v : av.data()) s += v;
  return g.push(make_node(Op::kMeanAll, Matrix(1, 1, s / static_cast<double>(av.size())), {a}));
}

NodeId sum_all(Graph& g, NodeId a) {
  double s = 0.0;
  for (double v : g.value(a).data()) s += v;
  return g.push(make_node(Op::kSumAll, Matrix(1, 1, s), {a}));
}

NodeId one_minus(Graph& g, NodeId a) {
  const Matrix& av = g.value(a);
  NodeId ones = g.constant(Matrix(av.rows(), av.cols(), 1.0));
  return sub(g, ones, a);
}

}  // namespace ganfp::ad
