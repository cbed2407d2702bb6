#include "fkl/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fkl {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

double floored_log(double p, double eps) { return std::log(p > eps ? p : eps); }

double kl_terms(std::span<const double> target, std::span<const double> pred, double eps_log) {
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    if (t == 0.0) continue;
    sum += t * (std::log(t) - floored_log(pred[i], eps_log));
  }
  return sum;
}

double smoothness_terms(std::span<const double> p, double eps_log) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    sum += (p[i] - p[i + 1]) * (floored_log(p[i], eps_log) - floored_log(p[i + 1], eps_log));
  }
  return 0.5 * sum;
}

Moments moments_of(std::span<const double> p, std::span<const double> y) {
  double mu = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mu += y[i] * p[i];
  double var = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = y[i] - mu;
    var += d * d * p[i];
  }
  return {mu, var};
}

void check_moments(const Moments& m, const char* which) {
  if (!std::isfinite(m.mu) || !std::isfinite(m.var) || m.var < 0.0) {
    throw std::invalid_argument(std::string("gaussian_kl: invalid ") + which + " moments");
  }
}

// Everything one sample's loss head needs. `grad`, when non-empty, receives
// d(total)/d(logits) restricted to the components enabled in `mask`.
LossBreakdown evaluate_head(std::span<const double> target, std::span<const double> logits,
                            const LabelGrid& grid, const LossConfig& cfg, ComponentMask mask,
                            std::span<double> grad) {
  require_same_length(target.size(), logits.size(), "loss");
  require_same_length(grid.size(), logits.size(), "loss");
  const NumericPolicy& policy = cfg.policy;
  const std::size_t n = logits.size();
  const Pmf pred_pmf = softmax(logits);
  const std::span<const double> pred = pred_pmf.probs();
  const std::span<const double> y = grid.values();

  LossBreakdown out;
  out.family = cfg.family;
  out.l_ld = kl_terms(target, pred, policy.eps_log);

  const Moments tm = moments_of(target, y);
  const Moments pm = moments_of(pred, y);
  const double diff = pm.mu - tm.mu;

  // Loss gradient with respect to the probabilities, up to an additive
  // constant (constants vanish through the softmax Jacobian). L_ld is
  // handled in logit space below.
  std::vector<double> dprob;
  if (!grad.empty()) {
    require_same_length(grad.size(), n, "loss gradient");
    dprob.assign(n, 0.0);
  }

  if (cfg.family == LossFamily::reference) {
    cfg.reference.validate();
    out.l_exp = l1_expectation(tm.mu, pm.mu);
    out.l_smooth = 0.0;
    out.total = out.l_ld + cfg.reference.lambda * out.l_exp;
    if (!dprob.empty() && diff != 0.0) {
      const double slope = cfg.reference.lambda * (diff > 0.0 ? 1.0 : -1.0);
      for (std::size_t i = 0; i < n; ++i) dprob[i] += slope * (y[i] - pm.mu);
    }
  } else {
    out.l_exp = gaussian_kl(tm, pm, policy);
    out.l_smooth = smoothness_terms(pred, policy.eps_log);
    out.total = out.l_ld + out.l_exp + out.l_smooth;
    if (!dprob.empty()) {
      if (mask.exp) {
        const bool floored = pm.var < policy.eps_var;
        const double var_hat = floored ? policy.eps_var : pm.var;
        const double d_mu = diff / var_hat;
        const double d_var =
            floored ? 0.0 : (var_hat - tm.var - diff * diff) / (2.0 * var_hat * var_hat);
        for (std::size_t i = 0; i < n; ++i) {
          const double c = y[i] - pm.mu;
          dprob[i] += d_mu * c + d_var * (c * c - pm.var);
        }
      }
      if (mask.smooth) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double a = pred[i];
          const double b = pred[i + 1];
          const double log_ratio = floored_log(a, policy.eps_log) - floored_log(b, policy.eps_log);
          const double da = a > policy.eps_log ? (a - b) / a : 0.0;
          const double db = b > policy.eps_log ? (a - b) / b : 0.0;
          dprob[i] += 0.5 * (log_ratio + da);
          dprob[i + 1] -= 0.5 * (log_ratio + db);
        }
      }
    }
  }

  if (!dprob.empty()) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += pred[i] * dprob[i];
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] * (dprob[i] - mean);
    if (mask.ld) {
      // d/dz_j of -sum_i t_i ln p_i is p_j T - t_j, T the target mass on
      // unfloored bins; floored bins are constants. Exactly p - t when
      // nothing is floored, so the gradient vanishes at pred == target.
      double floored_mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(pred[i] > policy.eps_log)) floored_mass += target[i];
      }
      const double mass = 1.0 - floored_mass;
      for (std::size_t i = 0; i < n; ++i) {
        grad[i] += pred[i] * mass - (pred[i] > policy.eps_log ? target[i] : 0.0);
      }
    }
  }
  return out;
}

}  // namespace

const char* to_string(LossFamily family) {
  return family == LossFamily::reference ? "reference" : "full_kl";
}

LossFamily parse_loss_family(std::string_view name) {
  if (name == "reference") return LossFamily::reference;
  if (name == "full_kl") return LossFamily::full_kl;
  throw std::invalid_argument("unknown loss family '" + std::string(name) + "'");
}

void ReferenceLossConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("ReferenceLossConfig: lambda must be finite and >= 0");
  }
}

double kl_div(const Pmf& target, const Pmf& pred, const NumericPolicy& policy) {
  require_same_length(target.size(), pred.size(), "kl_div");
  return kl_terms(target.probs(), pred.probs(), policy.eps_log);
}

double l1_expectation(double target_mu, double pred_mu) {
  if (std::isnan(target_mu) || std::isnan(pred_mu)) {
    throw std::invalid_argument("l1_expectation: NaN input");
  }
  return std::abs(pred_mu - target_mu);
}

double gaussian_kl(const Moments& target, const Moments& pred, const NumericPolicy& policy) {
  check_moments(target, "target");
  check_moments(pred, "predicted");
  if (target.var < policy.eps_var) {
    throw std::invalid_argument("gaussian_kl: target variance " + std::to_string(target.var) +
                                " below eps_var");
  }
  const double var_hat = pred.var > policy.eps_var ? pred.var : policy.eps_var;
  const double diff = pred.mu - target.mu;
  return 0.5 * std::log(var_hat / target.var) + (target.var + diff * diff) / (2.0 * var_hat) - 0.5;
}

double smoothness(const Pmf& pred, const NumericPolicy& policy) {
  if (pred.size() < 2) throw std::invalid_argument("smoothness: need at least two bins");
  return smoothness_terms(pred.probs(), policy.eps_log);
}

LossBreakdown reference_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                             const ReferenceLossConfig& cfg, const NumericPolicy& policy) {
  return evaluate_head(target.probs(), logits, grid,
                       {LossFamily::reference, cfg, policy}, {}, {});
}

LossBreakdown full_kl_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                           const NumericPolicy& policy) {
  if (logits.size() < 2) throw std::invalid_argument("full_kl_loss: need at least two bins");
  return evaluate_head(target.probs(), logits, grid, {LossFamily::full_kl, {}, policy}, {}, {});
}

LossBreakdown compute_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                           const LossConfig& cfg) {
  return evaluate_head(target.probs(), logits, grid, cfg, {}, {});
}

std::vector<double> full_kl_grad(const Pmf& target, std::span<const double> logits,
                                 const LabelGrid& grid, const NumericPolicy& policy,
                                 ComponentMask mask) {
  std::vector<double> grad(logits.size());
  evaluate_head(target.probs(), logits, grid, {LossFamily::full_kl, {}, policy}, mask, grad);
  return grad;
}

std::vector<double> reference_grad(const Pmf& target, std::span<const double> logits,
                                   const LabelGrid& grid, const ReferenceLossConfig& cfg,
                                   const NumericPolicy& policy) {
  std::vector<double> grad(logits.size());
  evaluate_head(target.probs(), logits, grid, {LossFamily::reference, cfg, policy}, {}, grad);
  return grad;
}

LossBreakdown loss_and_grad(const Pmf& target, std::span<const double> logits,
                            const LabelGrid& grid, const LossConfig& cfg, std::span<double> grad) {
  if (grad.size() != logits.size()) {
    throw std::invalid_argument("loss_and_grad: gradient buffer has wrong length");
  }
  return evaluate_head(target.probs(), logits, grid, cfg, {}, grad);
}

}  // namespace fkl
