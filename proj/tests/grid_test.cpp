#include "fkl/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "fkl/rng.hpp"

namespace fkl {
namespace {

TEST(MakeGridTest, AgeGridHas101Bins) {
  const LabelGrid g = make_grid(0, 100, 1);
  ASSERT_EQ(g.size(), 101u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 100.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], static_cast<double>(i));
}

TEST(MakeGridTest, HalfStep) {
  const LabelGrid g = make_grid(0, 1, 0.5);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.5);
  EXPECT_EQ(g[2], 1.0);
}

TEST(MakeGridTest, RejectsInvalidArguments) {
  EXPECT_THROW(make_grid(0, 1, -1), std::invalid_argument);
  EXPECT_THROW(make_grid(0, 1, 0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(make_grid(0, 1, 0.3), std::invalid_argument);
}

TEST(LabelGridTest, FromValuesDetectsUniformity) {
  EXPECT_TRUE(LabelGrid::from_values({7, 10, 13, 16}).is_uniform());
  const LabelGrid g = LabelGrid::from_values({0, 1, 3});
  EXPECT_FALSE(g.is_uniform());
  EXPECT_THROW(g.spacing(), std::logic_error);
  EXPECT_THROW(LabelGrid::from_values({1}), std::invalid_argument);
  EXPECT_THROW(LabelGrid::from_values({0, 2, 1}), std::invalid_argument);
  EXPECT_THROW(LabelGrid::from_values({0, 0, 1}), std::invalid_argument);
}

TEST(PmfTest, ValidatesInvariants) {
  EXPECT_NO_THROW(Pmf({0.25, 0.75}));
  EXPECT_THROW(Pmf({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(Pmf({1.2, -0.2}), std::invalid_argument);
  EXPECT_THROW(Pmf(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(Pmf({NAN, 1.0}), std::invalid_argument);
}

TEST(SoftmaxTest, WorkedExamples) {
  const Pmf a = softmax(std::vector<double>{0, 0});
  EXPECT_EQ(a[0], 0.5);
  EXPECT_EQ(a[1], 0.5);

  const Pmf b = softmax(std::vector<double>{0, std::log(3.0)});
  EXPECT_NEAR(b[0], 0.25, 1e-15);
  EXPECT_NEAR(b[1], 0.75, 1e-15);

  const Pmf c = softmax(std::vector<double>{1000, 1000, 1000});
  for (double p : c.probs()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTest, RejectsBadInput) {
  EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(softmax(std::vector<double>{0, NAN}), std::invalid_argument);
  EXPECT_THROW(softmax(std::vector<double>{0, INFINITY}), std::invalid_argument);
}

// The constant is added exactly (dyadic logits, integer shifts), so the shifted
// input differences are bit-identical and so must the output be.
TEST(SoftmaxTest, ShiftInvariantToTheLastBit) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(100);
    std::vector<double> x(n);
    for (double& v : x) v = std::ldexp(static_cast<double>(rng.below(8192)) - 4096.0, -10);
    const double c = static_cast<double>(rng.below(2000)) - 1000.0;
    std::vector<double> y = x;
    for (double& v : y) v += c;
    const Pmf p = softmax(x);
    const Pmf q = softmax(y);
    ASSERT_EQ(p, q);
    double sum = 0.0;
    for (double v : p.probs()) {
      ASSERT_GT(v, 0.0);
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, Pmf::kSumTolerance);
  }
}

TEST(MomentsTest, HandEvaluated) {
  const LabelGrid g = make_grid(0, 2, 1);
  const Moments m = moments(Pmf({0.25, 0.5, 0.25}), g);
  EXPECT_DOUBLE_EQ(m.mu, 1.0);
  EXPECT_DOUBLE_EQ(m.var, 0.5);
}

TEST(MomentsTest, OneHotHasZeroVariance) {
  const LabelGrid g = make_grid(0, 100, 1);
  for (std::size_t k : {0u, 23u, 100u}) {
    const Moments m = moments(Pmf::one_hot(101, k), g);
    EXPECT_EQ(m.mu, static_cast<double>(k));
    EXPECT_EQ(m.var, 0.0);
  }
}

TEST(MomentsTest, UniformOnAgeGrid) {
  const Moments m = moments(Pmf::uniform(101), make_grid(0, 100, 1));
  EXPECT_NEAR(m.mu, 50.0, 1e-12);
}

TEST(MomentsTest, LengthMismatchThrows) {
  EXPECT_THROW(moments(Pmf::uniform(3), make_grid(0, 100, 1)), std::invalid_argument);
}

TEST(MomentsTest, AcceptsNonUniformGrid) {
  const LabelGrid g = LabelGrid::from_values({0, 1, 3});
  const Moments m = moments(Pmf({0.5, 0.0, 0.5}), g);
  EXPECT_DOUBLE_EQ(m.mu, 1.5);
  EXPECT_DOUBLE_EQ(m.var, 2.25);
}

TEST(DiscretizeGaussianTest, ThreeBinExample) {
  // exp(-1/2), 1, exp(-1/2) normalized.
  const Pmf p = discretize_gaussian(1.0, 1.0, make_grid(0, 2, 1));
  EXPECT_NEAR(p[0], 0.274068619061197, 1e-12);
  EXPECT_NEAR(p[1], 0.451862761877606, 1e-12);
  EXPECT_NEAR(p[2], 0.274068619061197, 1e-12);
}

TEST(DiscretizeGaussianTest, SymmetricAboutCenter) {
  const LabelGrid g = make_grid(0, 100, 1);
  for (double sigma : {0.5, 1.0, 3.7, 20.0}) {
    const Pmf p = discretize_gaussian(50.0, sigma, g);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], p[100 - i]);
  }
}

TEST(DiscretizeGaussianTest, RecoversMoments) {
  const Moments m = moments(discretize_gaussian(40.0, 5.0, make_grid(0, 100, 1)), make_grid(0, 100, 1));
  EXPECT_LE(std::abs(m.mu - 40.0), 0.01);
  EXPECT_LE(std::abs(m.var / 25.0 - 1.0), 0.01);
}

// sigma >= 5 * step and the grid covering mu +- 5 sigma keep the relative
// moment error within 1%; halving the step must not make it worse.
TEST(DiscretizeGaussianTest, MomentErrorShrinksWithStep) {
  const double mu = 3.3, sigma = 1.0;
  double previous = INFINITY;
  for (double step : {1.0, 0.5, 0.2, 0.1}) {
    const LabelGrid g = make_grid(-5.0, 12.0, step);
    const Moments m = moments(discretize_gaussian(mu, sigma, g), g);
    const double err = std::max(std::abs(m.mu - mu) / mu, std::abs(m.var - 1.0));
    if (sigma >= 5.0 * step) EXPECT_LE(err, 0.01) << "step " << step;
    EXPECT_LE(err, previous + 1e-12);
    previous = err;
  }
}

TEST(DiscretizeGaussianTest, Errors) {
  const LabelGrid g = make_grid(0, 100, 1);
  EXPECT_THROW(discretize_gaussian(40, 0.49, g), std::invalid_argument);
  EXPECT_THROW(discretize_gaussian(40, 0.0, g), std::invalid_argument);
  EXPECT_THROW(discretize_gaussian(-11, 2.0, g), std::invalid_argument);
  EXPECT_THROW(discretize_gaussian(111, 2.0, g), std::invalid_argument);
  EXPECT_NO_THROW(discretize_gaussian(-9, 2.0, g));
  EXPECT_THROW(discretize_gaussian(1, 1, LabelGrid::from_values({0, 1, 3})), std::invalid_argument);
}

}  // namespace
}  // namespace fkl
