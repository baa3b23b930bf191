#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "ganfp/checkpoint.hpp"
#include "ganfp/error.hpp"
#include "ganfp/ganfp.hpp"
#include "ganfp/nn.hpp"
#include "ganfp/optimizer.hpp"
#include "support/oracles.hpp"

using namespace ganfp;
using nn::Direction;
using nn::NetworkSpec;
using nn::OutputActivation;

namespace {

NetworkSpec sigmoid_spec(std::vector<std::size_t> sizes) {
  return NetworkSpec{std::move(sizes), OutputActivation::kSigmoid, 1};
}

std::size_t closed_form_count(const std::vector<std::size_t>& n) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) total += n[i] * n[i + 1] + n[i + 1];
  return total;
}

ad::Gradients grads_of(const ad::ParamRef& p, Matrix g) {
  ad::Gradients out;
  out.set(p, std::move(g));
  return out;
}

}  // namespace

TEST_CASE("spec validation and parameter counts") {
  CHECK(sigmoid_spec({170, 64, 1}).parameter_count() == 11009);
  CHECK_THROWS_AS(sigmoid_spec({5}).validate(), SpecError);
  CHECK_THROWS_AS(sigmoid_spec({5, 0, 1}).validate(), SpecError);
  CHECK_THROWS_AS(nn::build_network("X", sigmoid_spec({3}), 1), SpecError);

  for (const auto& arch : {gan::Architecture::aps(), gan::Architecture::cmapss()}) {
    for (const auto* s : {&arch.g, &arch.d, &arch.q, &arch.p, &arch.d2}) {
      CHECK(s->parameter_count() == closed_form_count(s->layer_sizes));
    }
  }
  CHECK(gan::Architecture::aps().d.input_size() == 170);
  CHECK(gan::Architecture::cmapss().g.output_size() == 315);
}

TEST_CASE("initialisation") {
  const NetworkSpec spec = sigmoid_spec({7, 5, 3});
  const nn::Network a = nn::build_network("A", spec, 42);
  const nn::Network b = nn::build_network("A", spec, 42);
  const nn::Network c = nn::build_network("A", spec, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    const auto& la = a.layers()[i];
    CHECK(*la.weight == *b.layers()[i].weight);
    differs = differs || *la.weight != *c.layers()[i].weight;
    const double bound = std::sqrt(6.0 / static_cast<double>(la.weight->rows() + la.weight->cols()));
    for (double w : la.weight->data()) CHECK(std::abs(w) <= bound);
    CHECK(*la.bias == Matrix(1, la.weight->cols()));
  }
  CHECK(differs);
}

TEST_CASE("forward") {
  Rng rng(1);
  SUBCASE("sigmoid head stays in [0,1]") {
    const nn::Network p = nn::build_network("P", sigmoid_spec({6, 8, 8, 1}), 3);
    const Matrix out = p.infer(oracle::random_matrix(rng, 50, 6, -50.0, 50.0));
    for (double v : out.data()) CHECK((v >= 0.0 && v <= 1.0));
  }
  SUBCASE("zero weights give 0.5") {
    nn::Network p = nn::build_network("P", sigmoid_spec({4, 3, 1}), 3);
    p.zero_parameters();
    const Matrix out = p.infer(oracle::random_matrix(rng, 5, 4));
    for (double v : out.data()) CHECK(v == 0.5);
  }
  SUBCASE("CMAPSS generator shape") {
    const nn::Network g = nn::build_network("G", gan::Architecture::cmapss().g, 3);
    const Matrix out = g.infer(oracle::random_matrix(rng, 7, 64, 0.0, 1.0));
    CHECK(out.rows() == 7);
    CHECK(out.cols() == 315);
  }
  SUBCASE("code heads: sigmoid first column, linear rest") {
    nn::Network q = nn::build_network("Q", NetworkSpec{{3, 4}, OutputActivation::kCodeHeads, 1}, 3);
    q.zero_parameters();
    *q.layers()[0].bias = Matrix{{0.0, -2.0, 3.0, 0.25}};
    CHECK(q.infer(Matrix(2, 3)) == Matrix{{0.5, -2.0, 3.0, 0.25}, {0.5, -2.0, 3.0, 0.25}});
  }
  SUBCASE("width mismatch") {
    const nn::Network p = nn::build_network("P", sigmoid_spec({4, 3, 1}), 3);
    CHECK_THROWS_AS(p.infer(Matrix(2, 5)), DimensionError);
  }
  SUBCASE("pure") {
    const nn::Network p = nn::build_network("P", sigmoid_spec({4, 3, 1}), 3);
    const Matrix x = oracle::random_matrix(rng, 6, 4);
    CHECK(p.infer(x) == p.infer(x));
  }
}

TEST_CASE("shared prefix aliasing") {
  const auto aps = gan::Architecture::aps();
  SUBCASE("APS D and P share 2 entries") {
    const nn::Network d = nn::build_network("D", aps.d, 1);
    nn::Network p = nn::build_network("P", aps.p, 2);
    nn::share_prefix(d, p, 2);
    CHECK(p.layers()[0].weight == d.layers()[0].weight);
    CHECK(p.is_borrowed(0));
    CHECK_FALSE(p.is_borrowed(1));
    (*d.layers()[0].weight)(0, 0) = 123.0;
    CHECK((*p.layers()[0].weight)(0, 0) == 123.0);
    CHECK(p.layers()[1].weight != d.layers()[1].weight);
  }
  SUBCASE("k = 0 leaves networks independent") {
    const nn::Network d = nn::build_network("D", aps.d, 1);
    nn::Network p = nn::build_network("P", aps.p, 2);
    const Matrix before = *p.layers()[0].weight;
    nn::share_prefix(d, p, 0);
    (*d.layers()[0].weight)(0, 0) = 123.0;
    CHECK(*p.layers()[0].weight == before);
  }
  SUBCASE("CMAPSS k = 4 shares three weight matrices") {
    const auto cm = gan::Architecture::cmapss();
    const nn::Network d = nn::build_network("D", cm.d, 1);
    nn::Network q = nn::build_network("Q", cm.q, 2);
    nn::share_prefix(d, q, 4);
    CHECK(nn::shared_layer_count(4) == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(q.layers()[i].weight == d.layers()[i].weight);
    CHECK(q.layers()[3].weight != d.layers()[3].weight);
  }
  SUBCASE("shape mismatch is a spec error") {
    const nn::Network a = nn::build_network("A", sigmoid_spec({4, 3, 1}), 1);
    nn::Network b = nn::build_network("B", sigmoid_spec({4, 5, 1}), 2);
    CHECK_THROWS_AS(nn::share_prefix(a, b, 2), SpecError);
    nn::Network c = nn::build_network("C", sigmoid_spec({4, 3, 1}), 2);
    CHECK_THROWS_AS(nn::share_prefix(a, c, 4), SpecError);
  }
  SUBCASE("parameter store registers shared storage once under the owner") {
    const nn::Network d = nn::build_network("D", aps.d, 1);
    nn::Network p = nn::build_network("P", aps.p, 2);
    nn::share_prefix(d, p, 2);
    nn::ParamStore store;
    store.add(d);
    store.add(p);
    CHECK(store.size() == 4 + 4);
    CHECK(store.find("D.W0") != nullptr);
    CHECK(store.find("P.W0") == nullptr);
    CHECK(store.find("P.W1") != nullptr);
    CHECK(store.scalar_count() == aps.d.parameter_count() + aps.p.parameter_count() -
                                      (170 * 64 + 64));
  }
}

TEST_CASE("sgd") {
  auto p = std::make_shared<Matrix>(Matrix{{1.0}});
  std::vector<ad::ParamRef> params{p};
  nn::sgd_step(params, grads_of(p, Matrix{{2.0}}), 0.0, Direction::kDescend);
  CHECK((*p)[0] == 1.0);
  nn::sgd_step(params, grads_of(p, Matrix{{2.0}}), 0.1, Direction::kDescend);
  CHECK((*p)[0] == doctest::Approx(0.8).epsilon(1e-15));
  nn::sgd_step(params, grads_of(p, Matrix{{2.0}}), 0.1, Direction::kAscend);
  CHECK((*p)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(nn::sgd_step(params, grads_of(p, Matrix{{NAN}}), 0.1, Direction::kDescend),
                  NumericError);

  SUBCASE("listing the same storage twice updates it once") {
    auto q = std::make_shared<Matrix>(Matrix{{0.0}});
    std::vector<ad::ParamRef> twice{q, q};
    nn::sgd_step(twice, grads_of(q, Matrix{{1.0}}), 1.0, Direction::kDescend);
    CHECK((*q)[0] == -1.0);
  }
  SUBCASE("shared layer stepped through D then P sees both increments") {
    const auto spec = sigmoid_spec({2, 2, 1});
    const nn::Network d = nn::build_network("D", spec, 1);
    nn::Network pn = nn::build_network("P", spec, 2);
    nn::share_prefix(d, pn, 2);
    const auto& w = d.layers()[0].weight;
    const double start = (*w)[0];
    Matrix g(2, 2, 0.0);
    g[0] = 1.0;
    nn::sgd_step(d.parameter_refs(), grads_of(w, g), 0.5, Direction::kAscend);
    nn::sgd_step(pn.parameter_refs(), grads_of(pn.layers()[0].weight, g), 0.25,
                 Direction::kDescend);
    CHECK((*pn.layers()[0].weight)[0] == doctest::Approx(start + 0.5 - 0.25).epsilon(1e-15));
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves by lr") {
    for (Direction dir : {Direction::kDescend, Direction::kAscend}) {
      auto p = std::make_shared<Matrix>(Matrix{{3.0}});
      nn::AdamState state;
      nn::adam_step(std::vector<ad::ParamRef>{p}, grads_of(p, Matrix{{1.0}}), state, 0.01, 0.5,
                    0.999, 1e-8, dir);
      const double expected = dir == Direction::kDescend ? 3.0 - 0.01 : 3.0 + 0.01;
      CHECK((*p)[0] == doctest::Approx(expected).epsilon(1e-9));
      CHECK(state.step == 1);
    }
  }
  SUBCASE("zero gradient keeps parameters fixed") {
    auto p = std::make_shared<Matrix>(Matrix{{3.0, -1.0}});
    nn::Optimizer opt(nn::OptimizerConfig{}, {p});
    for (int i = 0; i < 100; ++i) opt.step(grads_of(p, Matrix(1, 2)), Direction::kDescend);
    CHECK(*p == Matrix{{3.0, -1.0}});
  }
  SUBCASE("deterministic") {
    auto run = [] {
      auto p = std::make_shared<Matrix>(Matrix{{0.5, 0.25}});
      nn::Optimizer opt(nn::OptimizerConfig{}, {p});
      Rng rng(9);
      for (int i = 0; i < 50; ++i) {
        opt.step(grads_of(p, oracle::random_matrix(rng, 1, 2)), Direction::kDescend);
      }
      return *p;
    };
    CHECK(run() == run());
  }
  SUBCASE("non-finite gradient") {
    auto p = std::make_shared<Matrix>(Matrix{{1.0}});
    nn::AdamState state;
    CHECK_THROWS_AS(nn::adam_step(std::vector<ad::ParamRef>{p}, grads_of(p, Matrix{{INFINITY}}),
                                  state, 0.01, 0.5, 0.999, 1e-8, Direction::kDescend),
                    NumericError);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto arch = gan::Architecture::for_dimension(5, 4);
  gan::Networks nets = gan::build_networks(arch, 2, 77);
  // Awkward values survive the trip unchanged.
  (*nets.g.layers()[0].weight)(0, 0) = -0.0;
  (*nets.g.layers()[0].weight)(0, 1) = std::numeric_limits<double>::denorm_min();
  (*nets.g.layers()[0].weight)(0, 2) = std::numeric_limits<double>::infinity();
  (*nets.g.layers()[0].weight)(0, 3) = 0.1 + 0.2;

  const nn::Checkpoint ckpt = nn::make_checkpoint(nets.store(), R"({"k":2})");
  std::stringstream buf;
  nn::write_checkpoint(buf, ckpt);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "GANFPCKP");
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);
  CHECK(bytes[9] == 0);

  const nn::Checkpoint back = nn::read_checkpoint(buf);
  CHECK(back.metadata == ckpt.metadata);
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ckpt.tensors[i].first);
    const Matrix& a = ckpt.tensors[i].second;
    const Matrix& b = back.tensors[i].second;
    REQUIRE(a.same_shape(b));
    CHECK(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
  }

  gan::Networks fresh = gan::build_networks(arch, 2, 1);
  nn::restore_checkpoint(back, fresh.store());
  CHECK(std::signbit((*fresh.g.layers()[0].weight)(0, 0)));
  CHECK(*fresh.d.layers()[1].weight == *nets.d.layers()[1].weight);
  CHECK(fresh.p.layers()[0].weight == fresh.d.layers()[0].weight);
  std::stringstream again;
  nn::write_checkpoint(again, nn::make_checkpoint(fresh.store(), R"({"k":2})"));
  CHECK(again.str() == bytes);
}

TEST_CASE("checkpoint errors") {
  const auto arch = gan::Architecture::for_dimension(5, 4);
  const gan::Networks nets = gan::build_networks(arch, 2, 77);
  std::stringstream buf;
  nn::write_checkpoint(buf, nn::make_checkpoint(nets.store(), "{}"));
  const std::string bytes = buf.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream s1(bad_magic);
  CHECK_THROWS_AS(nn::read_checkpoint(s1), FormatError);

  std::string bad_version = bytes;
  bad_version[8] = 2;
  std::stringstream s2(bad_version);
  CHECK_THROWS_AS(nn::read_checkpoint(s2), FormatError);

  std::stringstream s3(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(nn::read_checkpoint(s3), FormatError);

  const nn::Checkpoint ckpt = nn::make_checkpoint(nets.store(), "{}");
  const gan::Networks wider = gan::build_networks(gan::Architecture::for_dimension(6, 4), 2, 1);
  CHECK_THROWS_AS(nn::restore_checkpoint(ckpt, wider.store()), FormatError);
  nn::Checkpoint missing = ckpt;
  missing.tensors.pop_back();
  CHECK_THROWS_AS(nn::restore_checkpoint(missing, nets.store()), FormatError);
  CHECK_THROWS_AS(nn::load_checkpoint("/nonexistent/ckpt.bin"), FormatError);
}
