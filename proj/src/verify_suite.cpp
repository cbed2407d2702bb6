#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fkl/kernels.hpp"
#include "fkl/rng.hpp"
#include "fkl/runner.hpp"
#include "fkl/verify.hpp"

namespace fkl::runner {
namespace {

constexpr double kHeadGradTol = 1e-6;
constexpr double kNetworkGradTol = 1e-5;
constexpr double kGaussianKlTol = 1e-4;
constexpr double kAffineTol = 1e-9;
constexpr double kFdStep = 1e-5;

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<double> grid_values(const LabelGrid& g) { return {g.values().begin(), g.values().end()}; }

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  char buf[256];
  for (const CheckResult& c : checks) {
    std::snprintf(buf, sizeof buf, "[%s] %-28s max_error %.3e  tol %.1e  %s\n",
                  c.passed ? "PASS" : "FAIL", c.name.c_str(), c.max_error, c.tolerance,
                  c.detail.c_str());
    out << buf;
  }
  out << (passed() ? "all checks passed\n" : "VERIFICATION FAILED\n");
  return out.str();
}

CheckResult check_gaussian_kl_sweep(const GaussianKlFn& closed_form) {
  CheckResult r{"gaussian_kl_oracle_sweep", 0.0, kGaussianKlTol, true, ""};
  const double sigmas[] = {0.5, 1.0, 2.0, 5.0, 10.0};
  const double offsets[] = {0.0, 1.0, 10.0};
  std::size_t pairs = 0;
  for (double s : sigmas) {
    for (double s_hat : sigmas) {
      for (double d : offsets) {
        const Moments target{0.0, s * s};
        const Moments pred{d, s_hat * s_hat};
        const double exact = closed_form(target, pred, NumericPolicy{});
        const double numeric = verify::numeric_gaussian_kl(target, pred, 100000, 8.0);
        const double err = std::abs(exact - numeric);
        if (err > r.max_error || std::isnan(err)) {
          r.max_error = err;
          r.detail = "worst at sigma=" + num(s) + " sigma_hat=" + num(s_hat) + " dmu=" + num(d);
        }
        ++pairs;
      }
    }
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = std::to_string(pairs) + " pairs, " + r.detail;
  return r;
}

CheckResult check_head_gradients(LossFamily family, std::size_t n, std::size_t instances,
                                 std::uint64_t seed) {
  CheckResult r{std::string("head_grad_") + to_string(family) + "_n" + std::to_string(n), 0.0,
                kHeadGradTol, true, ""};
  Rng rng(seed * 1000003 + n);
  const LabelGrid grid = LabelGrid::uniform(0.0, static_cast<double>(n - 1), 1.0);
  const ReferenceLossConfig ref{1.0};
  const NumericPolicy policy;
  double worst_coord = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Pmf target = softmax(random_vector(rng, n, -2.0, 2.0));
    std::vector<double> logits = random_vector(rng, n, -3.0, 3.0);
    if (family == LossFamily::reference) {
      // The L1 term is not differentiable at mu_hat == mu; stay away from it.
      while (std::abs(moments(softmax(logits), grid).mu - moments(target, grid).mu) < 1e-3) {
        logits = random_vector(rng, n, -3.0, 3.0);
      }
    }
    const verify::ScalarFn f = [&](std::span<const double> z) {
      return family == LossFamily::full_kl ? full_kl_loss(target, z, grid, policy).total
                                           : reference_loss(target, z, grid, ref, policy).total;
    };
    const std::vector<double> analytic = family == LossFamily::full_kl
                                             ? full_kl_grad(target, logits, grid, policy)
                                             : reference_grad(target, logits, grid, ref, policy);
    const std::vector<double> numeric = verify::fd_grad(f, logits, kFdStep);
    const verify::GradCheckReport rep = verify::check_grad(analytic, numeric, kHeadGradTol);
    r.max_error = std::max(r.max_error, rep.rel_norm_error);
    worst_coord = std::max(worst_coord, rep.max_rel_error);
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = std::to_string(instances) + " instances, relative norm; per-coordinate max " +
             num(worst_coord);
  return r;
}

CheckResult check_network_gradient(LossFamily family, std::uint64_t seed) {
  CheckResult r{std::string("network_grad_") + to_string(family), 0.0, kNetworkGradTol, true, ""};
  Rng rng(seed);
  const LabelGrid grid = LabelGrid::uniform(0.0, 4.0, 1.0);
  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i) {
    samples.push_back(make_sample(std::to_string(i), random_vector(rng, 3, -1.0, 1.0),
                                  rng.uniform(1.0, 3.0), rng.uniform(0.6, 1.5), grid));
  }
  std::vector<const Sample*> batch;
  for (const Sample& s : samples) batch.push_back(&s);
  LossConfig cfg;
  cfg.family = family;
  cfg.reference.lambda = 1.0;

  const MlpParams params = init_mlp({3, 4, 5}, seed);
  std::vector<double> analytic(params.values.size());
  kernels::batch_gradient_serial(params, batch, grid, cfg, analytic);

  const verify::ScalarFn f = [&](std::span<const double> values) {
    MlpParams p = params;
    std::copy(values.begin(), values.end(), p.values.begin());
    double sum = 0.0;
    for (const Sample& s : samples) sum += compute_loss(s.target_pmf, forward(p, s.features), grid, cfg).total;
    return sum / static_cast<double>(samples.size());
  };
  const std::vector<double> numeric = verify::fd_grad(f, params.values, kFdStep);
  const verify::GradCheckReport rep = verify::check_grad(analytic, numeric, kNetworkGradTol);
  r.max_error = rep.rel_norm_error;
  r.passed = r.max_error <= r.tolerance;
  r.detail = "dims [3,4,5], " + std::to_string(params.values.size()) +
             " params, relative norm; per-coordinate max " + num(rep.max_rel_error);
  return r;
}

CheckResult check_affine_invariance(std::uint64_t seed) {
  CheckResult r{"affine_invariance", 0.0, kAffineTol, true, ""};
  Rng rng(seed);
  const LabelGrid grid = LabelGrid::uniform(0.0, 100.0, 1.0);
  std::vector<double> moved = grid_values(grid);
  for (double& y : moved) y = 3.0 * y + 7.0;
  const LabelGrid grid2 = LabelGrid::from_values(moved);
  const ReferenceLossConfig ref{1.0};
  double worst_scale = 0.0;
  bool exact_components = true;
  for (int k = 0; k < 100; ++k) {
    const Pmf target = softmax(random_vector(rng, grid.size(), -2.0, 2.0));
    const std::vector<double> logits = random_vector(rng, grid.size(), -3.0, 3.0);
    const LossBreakdown a = full_kl_loss(target, logits, grid);
    const LossBreakdown b = full_kl_loss(target, logits, grid2);
    r.max_error = std::max(r.max_error, std::abs(a.total - b.total) / std::abs(a.total));
    exact_components = exact_components && a.l_ld == b.l_ld && a.l_smooth == b.l_smooth;
    const LossBreakdown ra = reference_loss(target, logits, grid, ref);
    const LossBreakdown rb = reference_loss(target, logits, grid2, ref);
    worst_scale = std::max(worst_scale, std::abs(rb.l_exp - 3.0 * ra.l_exp));
  }
  // The reference L1 term scales by exactly 3 up to the rounding of two means
  // of magnitude 3 * 100 + 7.
  const double scale_tol = 64 * std::numeric_limits<double>::epsilon() * (3.0 * 100.0 + 7.0);
  r.passed = r.max_error <= r.tolerance && worst_scale <= scale_tol && exact_components;
  r.detail = "y -> 3y+7, full-KL total rel change; |ref l_exp' - 3 l_exp| " + num(worst_scale) +
             " (tol " + num(scale_tol) + ")" +
             (exact_components ? ", l_ld and l_smooth bit-identical" : ", l_ld/l_smooth CHANGED");
  return r;
}

CheckResult check_identities() {
  CheckResult r{"zero_identities", 0.0, 0.0, true, ""};
  Rng rng(7);
  for (std::size_t n : {2, 5, 101}) {
    const Pmf p = softmax(random_vector(rng, n, -3.0, 3.0));
    r.max_error = std::max(r.max_error, std::abs(kl_div(p, p)));
    r.max_error = std::max(r.max_error, std::abs(smoothness(Pmf::uniform(n))));
  }
  for (double var : {1e-6, 0.25, 4.0, 100.0}) {
    const Moments m{rng.uniform(-50.0, 50.0), var};
    r.max_error = std::max(r.max_error, std::abs(gaussian_kl(m, m)));
  }
  r.passed = r.max_error == 0.0;
  r.detail = "kl_div(p,p), smoothness(uniform), gaussian_kl(m,m) must be exactly 0";
  return r;
}

CheckResult check_nonnegativity(std::size_t instances, std::uint64_t seed) {
  CheckResult r{"nonnegativity", 0.0, 0.0, true, ""};
  Rng rng(seed);
  const ReferenceLossConfig ref{1.0};
  std::size_t violations = 0;
  double most_negative = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 2 + rng.below(100);
    const LabelGrid grid = LabelGrid::uniform(0.0, static_cast<double>(n - 1), 1.0);
    const double spread = rng.uniform(0.1, 6.0);
    const Pmf target = softmax(random_vector(rng, n, -spread, spread));
    const std::vector<double> logits = random_vector(rng, n, -spread, spread);
    const LossBreakdown f = full_kl_loss(target, logits, grid);
    const LossBreakdown g = reference_loss(target, logits, grid, ref);
    for (double v : {f.l_ld, f.l_exp, f.l_smooth, f.total, g.l_ld, g.l_exp, g.total}) {
      if (v < 0.0) {
        ++violations;
        most_negative = std::min(most_negative, v);
      }
    }
  }
  r.max_error = violations == 0 ? 0.0 : -most_negative;
  r.passed = violations == 0;
  r.detail = std::to_string(instances) + " instances, " + std::to_string(violations) + " negative components";
  return r;
}

VerifyReport verify_suite(const VerifyOptions& options) {
  VerifyReport report;
  const GaussianKlFn closed_form =
      options.gaussian_kl ? options.gaussian_kl
                          : GaussianKlFn([](const Moments& a, const Moments& b, const NumericPolicy& p) {
                              return gaussian_kl(a, b, p);
                            });
  report.checks.push_back(check_gaussian_kl_sweep(closed_form));
  for (LossFamily family : {LossFamily::full_kl, LossFamily::reference}) {
    for (std::size_t n : {2, 5, 101}) {
      report.checks.push_back(check_head_gradients(family, n, options.instances, options.seed));
    }
    report.checks.push_back(check_network_gradient(family, options.seed));
  }
  report.checks.push_back(check_affine_invariance(options.seed));
  report.checks.push_back(check_identities());
  report.checks.push_back(check_nonnegativity(10000, options.seed));
  return report;
}

}  // namespace fkl::runner
