#include "ganfp/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ganfp/error.hpp"
#include "ganfp/rng.hpp"

namespace ganfp::nn {

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw SpecError("NetworkSpec: need at least 2 layer sizes, got " +
                    std::to_string(layer_sizes.size()));
  }
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw SpecError("NetworkSpec: layer sizes must be >= 1");
  }
  if (output == OutputActivation::kCodeHeads && sigmoid_heads > output_size()) {
    throw SpecError("NetworkSpec: more sigmoid heads than output units");
  }
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    count += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
  }
  return count;
}

Network::Network(std::string name, NetworkSpec spec, std::uint64_t seed)
    : name_(std::move(name)), spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  for (std::size_t i = 0; i < spec_.layer_count(); ++i) {
    const std::size_t fan_in = spec_.layer_sizes[i];
    const std::size_t fan_out = spec_.layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    auto w = std::make_shared<Matrix>(fan_in, fan_out);
    for (double& v : w->data()) v = rng.uniform(-limit, limit);
    layers_.push_back({std::move(w), std::make_shared<Matrix>(1, fan_out), name_});
  }
}

Network build_network(std::string name, const NetworkSpec& spec, std::uint64_t seed) {
  return Network(std::move(name), spec, seed);
}

ad::NodeId Network::forward(ad::Graph& graph, ad::NodeId x) const {
  const Matrix& xv = graph.value(x);
  if (xv.cols() != spec_.input_size()) {
    throw DimensionError(name_ + ".forward: expected input width " +
                         std::to_string(spec_.input_size()) + ", got " + xv.shape_string());
  }
  ad::NodeId h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    ad::NodeId w = graph.parameter(layers_[i].weight);
    ad::NodeId b = graph.parameter(layers_[i].bias);
    h = ad::add_bias_rowwise(graph, ad::matmul(graph, h, w), b);
    if (i + 1 < layers_.size()) h = ad::relu(graph, h);
  }
  switch (spec_.output) {
    case OutputActivation::kSigmoid:
      return ad::sigmoid(graph, h);
    case OutputActivation::kLinear:
      return h;
    case OutputActivation::kCodeHeads: {
      const std::size_t heads = spec_.sigmoid_heads;
      const std::size_t width = spec_.output_size();
      if (heads == 0) return h;
      ad::NodeId probs = ad::sigmoid(graph, ad::slice_cols(graph, h, 0, heads));
      if (heads == width) return probs;
      return ad::concat_cols(graph, probs, ad::slice_cols(graph, h, heads, width - heads));
    }
  }
  return h;
}

Matrix Network::infer(const Matrix& x) const {
  ad::Graph g;
  return g.value(forward(g, g.constant(x)));
}

std::vector<NamedParam> Network::parameters() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string idx = std::to_string(i);
    out.push_back({layers_[i].owner + ".W" + idx, layers_[i].weight});
    out.push_back({layers_[i].owner + ".b" + idx, layers_[i].bias});
  }
  return out;
}

std::vector<NamedParam> Network::own_parameters() const {
  std::vector<NamedParam> out;
  for (auto& p : parameters()) {
    if (p.name.compare(0, name_.size() + 1, name_ + ".") == 0) out.push_back(std::move(p));
  }
  return out;
}

std::vector<ParamRef> Network::parameter_refs() const {
  std::vector<ParamRef> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

void Network::zero_parameters() {
  for (auto& l : layers_) {
    l.weight->fill(0.0);
    l.bias->fill(0.0);
  }
}

Network Network::clone(std::string name) const {
  Network copy;
  copy.name_ = std::move(name);
  copy.spec_ = spec_;
  for (const auto& l : layers_) {
    copy.layers_.push_back(
        {std::make_shared<Matrix>(*l.weight), std::make_shared<Matrix>(*l.bias), copy.name_});
  }
  return copy;
}

void share_prefix(const Network& owner, Network& borrower, std::size_t k_nodes) {
  const std::size_t n = shared_layer_count(k_nodes);
  if (n > owner.layers_.size() || n > borrower.layers_.size()) {
    throw SpecError("share_prefix: cannot share " + std::to_string(n) + " layers between " +
                    owner.name() + " and " + borrower.name());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& ow = *owner.layers_[i].weight;
    const Matrix& bw = *borrower.layers_[i].weight;
    if (!ow.same_shape(bw)) {
      throw SpecError("share_prefix: layer " + std::to_string(i) + " shape " + ow.shape_string() +
                      " (" + owner.name() + ") vs " + bw.shape_string() + " (" +
                      borrower.name() + ")");
    }
  }
  for (std::size_t i = 0; i < n; ++i) borrower.layers_[i] = owner.layers_[i];
}

void ParamStore::add(const Network& net) {
  for (auto& p : net.parameters()) {
    const bool seen = std::any_of(entries_.begin(), entries_.end(),
                                  [&](const NamedParam& e) { return e.value == p.value; });
    if (seen) continue;
    if (find(p.name) != nullptr) {
      throw SpecError("ParamStore: duplicate parameter name " + p.name);
    }
    entries_.push_back(std::move(p));
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value->size();
  return n;
}

const NamedParam* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace ganfp::nn
