#pragma once

// Eager reverse-mode differentiation over dense matrices.
//
// Every primitive computes its value immediately and appends a node to the
// graph. Inputs always carry smaller ids than the node that consumes them, so
// the node list is already a topological order and backward is one reverse
// sweep.

#include <array>
#include <cstddef>
#include <memory>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ganfp/matrix.hpp"

namespace ganfp::ad {

/// Storage of a trainable tensor. Networks that share a layer hold the same
/// pointer, which is how aliasing is expressed.
using ParamRef = std::shared_ptr<Matrix>;

struct NodeId {
  std::size_t index = 0;
  bool operator==(const NodeId&) const = default;
};

enum class Op {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kAddBiasRowwise,
  kRelu,
  kSigmoid,
  kLog,
  kNeg,
  kMulElem,
  kMulScalar,
  kSub,
  kSquare,
  kConcatCols,
  kSliceCols,
  kMeanAll,
  kSumAll,
};

std::string_view op_name(Op op);

/// Parameter gradients keyed by storage identity.
class Gradients {
 public:
  bool contains(const ParamRef& p) const { return grads_.count(p.get()) != 0; }
  const Matrix& at(const ParamRef& p) const;
  std::size_t size() const { return grads_.size(); }

  void set(const ParamRef& p, Matrix g) { grads_[p.get()] = std::move(g); }

 private:
  std::unordered_map<const Matrix*, Matrix> grads_;
};

/// Log clamp used by every loss; keeps log(0) finite when sigmoids saturate.
inline constexpr double kLogEps = 1e-12;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId constant(Matrix value);
  /// Leaf bound to a parameter. Repeated use of the same storage returns the
  /// same node so gradients accumulate in one place.
  NodeId parameter(const ParamRef& storage);

  const Matrix& value(NodeId id) const { return nodes_.at(id.index).value; }
  const Matrix& gradient(NodeId id) const { return nodes_.at(id.index).grad; }
  Op op(NodeId id) const { return nodes_.at(id.index).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Populates node gradients for every ancestor of `loss` (others stay zero)
  /// and returns gradients for all parameter leaves in the graph.
  /// Throws ContractError unless `loss` is 1x1 and finite.
  Gradients backward(NodeId loss);

  /// Throws NumericError naming the first node holding a non-finite value.
  void check_finite() const;

  // Internal: used by the primitive free functions.
  struct Node {
    Op op = Op::kConstant;
    std::array<std::size_t, 2> inputs{};
    std::size_t arity = 0;
    double scalar = 0.0;
    std::size_t offset = 0;
    Matrix value;
    Matrix grad;
    ParamRef storage;
  };
  NodeId push(Node node);
  const Node& node(NodeId id) const { return nodes_.at(id.index); }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, std::size_t> param_nodes_;
};

NodeId matmul(Graph& g, NodeId a, NodeId b);
NodeId add(Graph& g, NodeId a, NodeId b);
/// a (n x m) plus bias (1 x m) broadcast over rows.
NodeId add_bias_rowwise(Graph& g, NodeId a, NodeId bias);
NodeId relu(Graph& g, NodeId a);
NodeId sigmoid(Graph& g, NodeId a);
/// ln(max(a, eps)) elementwise. eps must be > 0.
NodeId log(Graph& g, NodeId a, double eps = kLogEps);
NodeId neg(Graph& g, NodeId a);
NodeId mul_elem(Graph& g, NodeId a, NodeId b);
NodeId mul_scalar(Graph& g, NodeId a, double k);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId square(Graph& g, NodeId a);
NodeId concat_cols(Graph& g, NodeId a, NodeId b);
/// Columns [begin, begin + count) of a.
NodeId slice_cols(Graph& g, NodeId a, std::size_t begin, std::size_t count);
NodeId mean_all(Graph& g, NodeId a);
NodeId sum_all(Graph& g, NodeId a);

/// 1 - a, built from a constant of ones.
NodeId one_minus(Graph& g, NodeId a);

}  // namespace ganfp::ad
