#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fkl/grid.hpp"

namespace fkl::verify {

using ScalarFn = std::function<double(std::span<const double>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  /// ||a - n|| / max(1e-12, ||a|| + ||n||), reported alongside the
  /// per-coordinate maximum.
  double rel_norm_error = 0.0;
  bool passed = true;
  double tolerance = 0.0;
};

/// Central differences (f(x + h_i e_i) - f(x - h_i e_i)) / (2 h_i) with
/// h_i = h * max(1, |x_i|). Coordinates are evaluated concurrently; `f` must
/// be safe to call from several threads.
std::vector<double> fd_grad(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

/// Single-threaded reference for fd_grad; results are bit-identical.
std::vector<double> fd_grad_serial(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

/// Per-coordinate |a_i - n_i| / max(1e-12, |a_i| + |n_i|); passes when the
/// maximum is <= tol.
GradCheckReport check_grad(std::span<const double> analytic, std::span<const double> numeric,
                           double tol);

/// KL between two normals computed by brute force: both densities are
/// discretized on a shared fine grid covering both means +- span_sigmas * max
/// sigma, normalized in log space, and summed term by term.
double numeric_gaussian_kl(const Moments& target, const Moments& pred, std::size_t points = 100000,
                           double span_sigmas = 8.0);

}  // namespace fkl::verify
