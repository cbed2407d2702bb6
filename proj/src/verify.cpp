#include "fkl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fkl::verify {
namespace {

double fd_coordinate(const ScalarFn& f, std::span<const double> x, std::vector<double>& scratch,
                     std::size_t i, double h) {
  const double step = h * std::max(1.0, std::abs(x[i]));
  scratch[i] = x[i] + step;
  const double up = f(scratch);
  scratch[i] = x[i] - step;
  const double down = f(scratch);
  scratch[i] = x[i];
  if (!std::isfinite(up) || !std::isfinite(down)) {
    throw std::runtime_error("fd_grad: non-finite evaluation at coordinate " + std::to_string(i));
  }
  return (up - down) / (2.0 * step);
}

void check_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("fd_grad: h must be positive");
}

// log-density of N(mu, var) on the grid, normalized with log-sum-exp.
std::vector<double> log_pmf(std::span<const double> y, double mu, double var) {
  std::vector<double> out(y.size());
  double max_v = -INFINITY;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - mu;
    out[i] = -d * d / (2.0 * var);
    max_v = std::max(max_v, out[i]);
  }
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - max_v);
  const double log_z = max_v + std::log(sum);
  for (double& v : out) v -= log_z;
  return out;
}

}  // namespace

std::vector<double> fd_grad(const ScalarFn& f, std::span<const double> x, double h) {
  check_step(h);
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> grad(x.size());
  std::string error;
#pragma omp parallel
  {
    std::vector<double> scratch(x.begin(), x.end());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        grad[i] = fd_coordinate(f, x, scratch, static_cast<std::size_t>(i), h);
      } catch (const std::exception& e) {
#pragma omp critical(fkl_fd_error)
        if (error.empty()) error = e.what();
      }
    }
  }
  if (!error.empty()) throw std::runtime_error(error);
  return grad;
}

std::vector<double> fd_grad_serial(const ScalarFn& f, std::span<const double> x, double h) {
  check_step(h);
  std::vector<double> grad(x.size());
  std::vector<double> scratch(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = fd_coordinate(f, x, scratch, i, h);
  return grad;
}

GradCheckReport check_grad(std::span<const double> analytic, std::span<const double> numeric,
                           double tol) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("check_grad: length mismatch");
  }
  GradCheckReport report;
  report.tolerance = tol;
  double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double err = std::abs(a - n) / std::max(1e-12, std::abs(a) + std::abs(n));
    if (err > report.max_rel_error || std::isnan(err)) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
    diff_sq += (a - n) * (a - n);
    a_sq += a * a;
    n_sq += n * n;
  }
  report.rel_norm_error = std::sqrt(diff_sq) / std::max(1e-12, std::sqrt(a_sq) + std::sqrt(n_sq));
  report.passed = report.max_rel_error <= tol;
  return report;
}

double numeric_gaussian_kl(const Moments& target, const Moments& pred, std::size_t points,
                           double span_sigmas) {
  if (points < 10000) throw std::invalid_argument("numeric_gaussian_kl: need >= 1e4 points");
  if (!(span_sigmas >= 8.0)) throw std::invalid_argument("numeric_gaussian_kl: span must be >= 8");
  if (!(target.var > 0.0) || !(pred.var > 0.0) || !std::isfinite(target.var) ||
      !std::isfinite(pred.var) || !std::isfinite(target.mu) || !std::isfinite(pred.mu)) {
    throw std::invalid_argument("numeric_gaussian_kl: degenerate moments");
  }
  if (target.var < NumericPolicy{}.eps_var || pred.var < NumericPolicy{}.eps_var) {
    throw std::invalid_argument("numeric_gaussian_kl: variance below floor");
  }
  const double reach = span_sigmas * std::sqrt(std::max(target.var, pred.var));
  const double lo = std::min(target.mu, pred.mu) - reach;
  const double hi = std::max(target.mu, pred.mu) + reach;
  std::vector<double> y(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) y[i] = lo + static_cast<double>(i) * step;

  // Log space keeps ln q exact where q itself underflows (narrow pred,
  // wide target).
  const std::vector<double> log_p = log_pmf(y, target.mu, target.var);
  const std::vector<double> log_q = log_pmf(y, pred.mu, pred.var);
  double kl = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double p = std::exp(log_p[i]);
    if (p > 0.0) kl += p * (log_p[i] - log_q[i]);
  }
  return kl;
}

}  // namespace fkl::verify
