// OpenMP kernels against their serial references. Run with OMP_NUM_THREADS
// set to compare thread counts; results are bit-identical either way.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "fkl/data.hpp"
#include "fkl/kernels.hpp"
#include "fkl/verify.hpp"

namespace {

using namespace fkl;

struct Setup {
  LabelGrid grid = make_grid(0.0, 100.0, 1.0);
  Dataset ds = gen_synthetic({1024, 16, 2.0, 6.0, 1}, grid);
  MlpParams params = init_mlp({16, 64, 64, 101}, 0);
  std::vector<const Sample*> batch;

  explicit Setup(std::size_t batch_size) {
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&ds.samples[i]);
  }
};

void BM_BatchGradient(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)));
  std::vector<double> grad(s.params.values.size());
  BatchWorkspace ws;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient(s.params, s.batch, s.grid, LossConfig{}, ws, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BatchGradientSerial(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)));
  std::vector<double> grad(s.params.values.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::batch_gradient_serial(s.params, s.batch, s.grid, LossConfig{}, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_BatchGradient)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_BatchGradientSerial)->Arg(32)->Arg(128)->Arg(512);

void BM_Evaluate(benchmark::State& state) {
  const Setup s(0);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate(s.params, s.ds, LossConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.ds.size()));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const Setup s(0);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_serial(s.params, s.ds, LossConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.ds.size()));
}

BENCHMARK(BM_Evaluate);
BENCHMARK(BM_EvaluateSerial);

// Finite differences over the 101 logits of the full-KL head.
struct FdSetup {
  LabelGrid grid = make_grid(0.0, 100.0, 1.0);
  Pmf target = discretize_gaussian(40.0, 5.0, grid);
  std::vector<double> logits;
  verify::ScalarFn f;
  FdSetup() : logits(101) {
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = std::sin(0.3 * static_cast<double>(i));
    f = [this](std::span<const double> z) { return full_kl_loss(target, z, grid).total; };
  }
};

void BM_FdGrad(benchmark::State& state) {
  const FdSetup s;
  for (auto _ : state) benchmark::DoNotOptimize(verify::fd_grad(s.f, s.logits));
}

void BM_FdGradSerial(benchmark::State& state) {
  const FdSetup s;
  for (auto _ : state) benchmark::DoNotOptimize(verify::fd_grad_serial(s.f, s.logits));
}

BENCHMARK(BM_FdGrad);
BENCHMARK(BM_FdGradSerial);

}  // namespace

BENCHMARK_MAIN();
