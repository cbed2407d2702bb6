#include <gtest/gtest.h>

#include <omp.h>

#include <vector>

#include "fkl/data.hpp"
#include "fkl/kernels.hpp"

namespace fkl::kernels {
namespace {

// Parallel kernels must match the serial references bit for bit, whatever
// the thread count (the host may have a single core, so threads are forced).
class ThreadCount : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }

 private:
  int saved_ = 1;
};

struct Fixture {
  LabelGrid grid = make_grid(0.0, 100.0, 1.0);
  Dataset ds = gen_synthetic({77, 6, 2.0, 6.0, 4}, grid);
  MlpParams params = init_mlp({6, 16, 12, 101}, 8);
  std::vector<const Sample*> batch;
  Fixture() {
    for (const Sample& s : ds.samples) batch.push_back(&s);
  }
};

TEST_P(ThreadCount, BatchGradientMatchesSerial) {
  const Fixture fx;
  for (LossFamily family : {LossFamily::full_kl, LossFamily::reference}) {
    LossConfig cfg;
    cfg.family = family;
    std::vector<double> par(fx.params.values.size()), ser(fx.params.values.size());
    BatchWorkspace ws;
    const LossBreakdown a = batch_gradient(fx.params, fx.batch, fx.grid, cfg, ws, par);
    const LossBreakdown b = batch_gradient_serial(fx.params, fx.batch, fx.grid, cfg, ser);
    EXPECT_EQ(a, b) << to_string(family);
    EXPECT_EQ(par, ser) << to_string(family);
    // Reusing the workspace must not leak state between calls.
    std::vector<double> again(par.size());
    batch_gradient(fx.params, fx.batch, fx.grid, cfg, ws, again);
    EXPECT_EQ(again, par);
  }
}

TEST_P(ThreadCount, EvaluateMatchesSerial) {
  const Fixture fx;
  for (LossFamily family : {LossFamily::full_kl, LossFamily::reference}) {
    LossConfig cfg;
    cfg.family = family;
    const Metrics a = kernels::evaluate(fx.params, fx.ds, cfg);
    const Metrics b = evaluate_serial(fx.params, fx.ds, cfg);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.mae, b.mae);
  }
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCount, ::testing::Values(1, 2, 3, 8));

TEST(BatchGradient, MeanOfPerSampleGradients) {
  const Fixture fx;
  const LossConfig cfg;
  std::vector<double> whole(fx.params.values.size());
  batch_gradient_serial(fx.params, fx.batch, fx.grid, cfg, whole);
  std::vector<double> mean(whole.size(), 0.0), one(whole.size());
  for (const Sample* s : fx.batch) {
    const std::vector<const Sample*> single{s};
    batch_gradient_serial(fx.params, single, fx.grid, cfg, one);
    for (std::size_t i = 0; i < one.size(); ++i) mean[i] += one[i];
  }
  for (std::size_t i = 0; i < mean.size(); ++i) {
    EXPECT_NEAR(mean[i] / static_cast<double>(fx.batch.size()), whole[i], 1e-13);
  }
}

TEST(BatchGradient, Errors) {
  const Fixture fx;
  std::vector<double> grad(fx.params.values.size());
  BatchWorkspace ws;
  const std::vector<const Sample*> none;
  EXPECT_THROW(batch_gradient(fx.params, none, fx.grid, LossConfig{}, ws, grad), std::invalid_argument);
  std::vector<double> short_grad(3);
  EXPECT_THROW(batch_gradient(fx.params, fx.batch, fx.grid, LossConfig{}, ws, short_grad),
               std::invalid_argument);
}

}  // namespace
}  // namespace fkl::kernels
