#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ganfp/autodiff.hpp"
#include "ganfp/grad_check.hpp"
#include "ganfp/matrix.hpp"

namespace ganfp::nn {

using ad::NamedParam;
using ad::ParamRef;

enum class OutputActivation {
  kSigmoid,
  kLinear,
  /// First `sigmoid_heads` output columns pass through a sigmoid, the rest
  /// stay linear. Used by Q (categorical + continuous code heads).
  kCodeHeads,
};

/// Fully connected network shape: input width first, output width last.
/// Hidden layers always use relu.
struct NetworkSpec {
  std::vector<std::size_t> layer_sizes;
  OutputActivation output = OutputActivation::kSigmoid;
  std::size_t sigmoid_heads = 1;

  /// Throws SpecError for fewer than two sizes or a zero width.
  void validate() const;
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }
  /// Sum over layers of n_i * n_{i+1} + n_{i+1}.
  std::size_t parameter_count() const;
};

struct Layer {
  ParamRef weight;  // n_i x n_{i+1}
  ParamRef bias;    // 1 x n_{i+1}
  std::string owner;
};

class Network {
 public:
  Network() = default;
  Network(std::string name, NetworkSpec spec, std::uint64_t seed);

  const std::string& name() const { return name_; }
  const NetworkSpec& spec() const { return spec_; }
  std::span<const Layer> layers() const { return layers_; }
  bool is_borrowed(std::size_t layer) const { return layers_.at(layer).owner != name_; }

  /// Records the forward pass of `x` (n x input_size) on `graph`.
  ad::NodeId forward(ad::Graph& graph, ad::NodeId x) const;
  /// Forward pass on a throwaway graph.
  Matrix infer(const Matrix& x) const;

  /// Every weight and bias, named "<net>.W<i>" / "<net>.b<i>" after the
  /// layer's owner.
  std::vector<NamedParam> parameters() const;
  /// Parameters whose owner is this network (borrowed layers excluded).
  std::vector<NamedParam> own_parameters() const;
  std::vector<ParamRef> parameter_refs() const;
  std::size_t parameter_count() const { return spec_.parameter_count(); }

  /// All parameters set to zero (handy for closed-form checks).
  void zero_parameters();
  /// Deep copy with fresh storage; sharing is not preserved.
  Network clone(std::string name) const;

 private:
  friend void share_prefix(const Network& owner, Network& borrower, std::size_t k_nodes);

  std::string name_;
  NetworkSpec spec_;
  std::vector<Layer> layers_;
};

/// Glorot-uniform weights, zero biases. Deterministic per seed.
Network build_network(std::string name, const NetworkSpec& spec, std::uint64_t seed);

/// Number of weight matrices shared when `k_nodes` entries of the layer-size
/// list are shared, i.e. the transitions between those entries.
constexpr std::size_t shared_layer_count(std::size_t k_nodes) {
  return k_nodes < 2 ? 0 : k_nodes - 1;
}

/// Makes the borrower's first shared_layer_count(k_nodes) layers alias the
/// owner's storage. Throws SpecError if any of those layer shapes differ.
void share_prefix(const Network& owner, Network& borrower, std::size_t k_nodes);

/// Registry of named parameter storage across networks. Aliased layers are
/// registered once, under the name of the network that owns them.
class ParamStore {
 public:
  void add(const Network& net);
  /// Unique storage in registration order.
  const std::vector<NamedParam>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const NamedParam* find(const std::string& name) const;

 private:
  std::vector<NamedParam> entries_;
};

}  // namespace ganfp::nn
