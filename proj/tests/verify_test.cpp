#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fkl/grid.hpp"
#include "fkl/losses.hpp"
#include "fkl/verify.hpp"

namespace fkl::verify {
namespace {

TEST(FdGrad, QuadraticIsExact) {
  const ScalarFn f = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> g = fd_grad(f, x, 1e-5);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FdGrad, ConstantGivesZero) {
  const ScalarFn f = [](std::span<const double>) { return 3.5; };
  const std::vector<double> x{0.1, -4.0, 7.0};
  for (double v : fd_grad(f, x)) EXPECT_EQ(v, 0.0);
}

TEST(FdGrad, SecondDegreePolynomialToRounding) {
  // 3x0^2 - 2 x0 x1 + x1 + 5, gradient (6x0 - 2x1, -2x0 + 1)
  const ScalarFn f = [](std::span<const double> x) {
    return 3 * x[0] * x[0] - 2 * x[0] * x[1] + x[1] + 5;
  };
  const std::vector<double> x{-0.7, 2.5};
  const std::vector<double> g = fd_grad(f, x);
  EXPECT_NEAR(g[0], 6 * x[0] - 2 * x[1], 1e-8);
  EXPECT_NEAR(g[1], -2 * x[0] + 1, 1e-8);
}

TEST(FdGrad, MatchesFullKlGradient) {
  const LabelGrid grid = make_grid(0.0, 4.0, 1.0);
  const Pmf target = softmax(std::vector<double>{0.3, -1.0, 0.8, 0.1, -0.4});
  const std::vector<double> logits{1.2, -0.5, 0.0, 2.0, -1.1};
  const ScalarFn f = [&](std::span<const double> z) { return full_kl_loss(target, z, grid).total; };
  const GradCheckReport rep = check_grad(full_kl_grad(target, logits, grid), fd_grad(f, logits), 1e-6);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(FdGrad, ParallelEqualsSerial) {
  const ScalarFn f = [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::sin(x[i] * static_cast<double>(i + 1));
    return s;
  };
  std::vector<double> x(57);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i) - 2.0;
  EXPECT_EQ(fd_grad(f, x), fd_grad_serial(f, x));
}

TEST(FdGrad, Errors) {
  const ScalarFn f = [](std::span<const double> x) { return x[0]; };
  const std::vector<double> x{1.0};
  EXPECT_THROW(fd_grad(f, x, 0.0), std::invalid_argument);
  EXPECT_THROW(fd_grad(f, x, -1e-5), std::invalid_argument);
  const ScalarFn bad = [](std::span<const double> z) { return std::log(z[0] - 1.0); };
  EXPECT_THROW(fd_grad(bad, x), std::runtime_error);
  EXPECT_THROW(fd_grad_serial(bad, x), std::runtime_error);
}

TEST(CheckGrad, IdenticalVectors) {
  const std::vector<double> a{1.0, -2.0, 3.0};
  const GradCheckReport rep = check_grad(a, a, 1e-6);
  EXPECT_EQ(rep.max_rel_error, 0.0);
  EXPECT_EQ(rep.rel_norm_error, 0.0);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.tolerance, 1e-6);
}

// With the |a| + |n| denominator a 2e-6 difference at magnitude 1 scores
// just under 1e-6, so the boundary sits between 2e-6 and 3e-6.
TEST(CheckGrad, Boundary) {
  const std::vector<double> a{1.0, 1.0};
  const GradCheckReport at = check_grad(a, std::vector<double>{1.0, 1.0 + 2e-6}, 1e-6);
  EXPECT_NEAR(at.max_rel_error, 2e-6 / (2.0 + 2e-6), 1e-15);
  EXPECT_EQ(at.worst_index, 1u);
  EXPECT_TRUE(at.passed);
  const GradCheckReport over = check_grad(a, std::vector<double>{1.0, 1.0 + 3e-6}, 1e-6);
  EXPECT_FALSE(over.passed);
  EXPECT_FALSE(check_grad(a, std::vector<double>{1.0, 1.0 + 2e-6}, 9.9e-7).passed);
}

TEST(CheckGrad, ZeroVectorsPass) {
  const std::vector<double> z(4, 0.0);
  const GradCheckReport rep = check_grad(z, z, 1e-6);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.max_rel_error, 0.0);
}

TEST(CheckGrad, LengthMismatch) {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  EXPECT_THROW(check_grad(a, b, 1e-6), std::invalid_argument);
}

TEST(NumericGaussianKl, EqualMomentsIsZero) {
  EXPECT_NEAR(numeric_gaussian_kl({3.0, 4.0}, {3.0, 4.0}), 0.0, 1e-10);
  EXPECT_NEAR(numeric_gaussian_kl({-10.0, 0.25}, {-10.0, 0.25}), 0.0, 1e-10);
}

TEST(NumericGaussianKl, SpotValues) {
  EXPECT_NEAR(numeric_gaussian_kl({0.0, 1.0}, {1.0, 1.0}), 0.5, 1e-4);
  EXPECT_NEAR(numeric_gaussian_kl({0.0, 1.0}, {0.0, 4.0}), 0.318147, 1e-4);
}

TEST(NumericGaussianKl, ConvergesToClosedForm) {
  const Moments pairs[][2] = {{{0.0, 1.0}, {1.0, 1.0}},
                              {{0.0, 0.25}, {10.0, 100.0}},
                              {{0.0, 100.0}, {1.0, 0.25}},
                              {{0.0, 4.0}, {0.0, 25.0}}};
  for (const auto& p : pairs) {
    const double exact = gaussian_kl(p[0], p[1]);
    const double coarse = std::abs(numeric_gaussian_kl(p[0], p[1], 10000) - exact);
    const double fine = std::abs(numeric_gaussian_kl(p[0], p[1], 100000) - exact);
    EXPECT_LE(fine, std::max(coarse / 2.0, 1e-9)) << coarse << " " << fine;
  }
}

TEST(NumericGaussianKl, Preconditions) {
  EXPECT_THROW(numeric_gaussian_kl({0.0, 1.0}, {0.0, 1.0}, 9999), std::invalid_argument);
  EXPECT_THROW(numeric_gaussian_kl({0.0, 1.0}, {0.0, 1.0}, 100000, 7.9), std::invalid_argument);
  EXPECT_THROW(numeric_gaussian_kl({0.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(numeric_gaussian_kl({0.0, 1.0}, {0.0, 1e-9}), std::invalid_argument);
}

}  // namespace
}  // namespace fkl::verify
