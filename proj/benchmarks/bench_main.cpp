#include <benchmark/benchmark.h>

#include "ganfp/autodiff.hpp"
#include "ganfp/data.hpp"
#include "ganfp/ganfp.hpp"
#include "ganfp/nn.hpp"
#include "ganfp/resample.hpp"
#include "ganfp/rng.hpp"

namespace {

using namespace ganfp;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    ad::Graph g;
    benchmark::DoNotOptimize(g.value(ad::matmul(g, g.constant(a), g.constant(b))));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// Forward and backward of the APS-width classifier on one batch.
void BM_ForwardBackward(benchmark::State& state) {
  const gan::Architecture arch = gan::Architecture::aps();
  const nn::Network p("P", arch.p, 3);
  const Matrix x = random_matrix(64, arch.p.input_size(), 4);
  for (auto _ : state) {
    ad::Graph g;
    const ad::NodeId loss = ad::mean_all(g, p.forward(g, g.constant(x)));
    benchmark::DoNotOptimize(g.backward(loss));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_TrainingBatch(benchmark::State& state) {
  data::SynthOptions so;
  so.n_major = 2000;
  so.n_minor = 40;
  const data::Dataset ds = data::synth_imbalanced(so);
  const Matrix X = data::apply_normalize(data::fit_normalize(ds.X), ds.X);
  gan::GanFpConfig cfg;
  cfg.total_batches = 1u << 30;
  gan::Trainer trainer(cfg, gan::Architecture::for_dimension(so.d, 64), X, ds.y);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_batch());
}
BENCHMARK(BM_TrainingBatch);

void BM_Smote(benchmark::State& state) {
  data::SynthOptions so;
  so.n_major = 5000;
  so.n_minor = static_cast<std::size_t>(state.range(0));
  const data::Dataset ds = data::synth_imbalanced(so);
  for (auto _ : state) benchmark::DoNotOptimize(resample::smote(ds.X, ds.y, 5, 1000, 7));
}
BENCHMARK(BM_Smote)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
