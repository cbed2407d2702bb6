#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "fkl/grid.hpp"

namespace fkl {

enum class LossFamily { reference, full_kl };

const char* to_string(LossFamily family);
/// Accepts "reference" and "full_kl"; throws std::invalid_argument otherwise.
LossFamily parse_loss_family(std::string_view name);

/// Per-component loss record. For the reference family l_exp is an L1 distance
/// in label units and l_smooth is 0; for full-KL every component is in nats.
struct LossBreakdown {
  LossFamily family = LossFamily::full_kl;
  double l_ld = 0.0;
  double l_exp = 0.0;
  double l_smooth = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Weighting of the L1 expectation term in L = L_ld + lambda * L_exp.
/// There is no hyperparameter-free default; 1.0 is the documented example.
struct ReferenceLossConfig {
  double lambda = 1.0;

  void validate() const;
};

/// Family plus everything the family needs; what the trainer consumes.
struct LossConfig {
  LossFamily family = LossFamily::full_kl;
  ReferenceLossConfig reference;
  NumericPolicy policy;
};

/// Selects which full-KL components contribute to full_kl_grad.
struct ComponentMask {
  bool ld = true;
  bool exp = true;
  bool smooth = true;
};

/// sum_i t_i ln(t_i / max(p_i, eps_log)), with 0 ln 0 := 0.
double kl_div(const Pmf& target, const Pmf& pred, const NumericPolicy& policy = {});

/// |pred_mu - target_mu|; NaN input throws.
double l1_expectation(double target_mu, double pred_mu);

/// KL between the normals with the given moments:
///   ln(s_hat / s) + (s^2 + (mu_hat - mu)^2) / (2 s_hat^2) - 1/2
/// where s_hat^2 = max(pred.var, eps_var). target.var must be >= eps_var.
double gaussian_kl(const Moments& target, const Moments& pred, const NumericPolicy& policy = {});

/// Symmetrized KL between pred and its one-step shift, over the n-1 adjacent
/// pairs: 1/2 sum_i (p_i - p_{i+1}) ln(p_i / p_{i+1}). No wraparound.
double smoothness(const Pmf& pred, const NumericPolicy& policy = {});

LossBreakdown reference_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                             const ReferenceLossConfig& cfg, const NumericPolicy& policy = {});

LossBreakdown full_kl_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                           const NumericPolicy& policy = {});

/// Dispatches on cfg.family.
LossBreakdown compute_loss(const Pmf& target, std::span<const double> logits, const LabelGrid& grid,
                           const LossConfig& cfg);

/// d(total)/d(logits) of full_kl_loss. Gradients flow through both predicted
/// moments; when the predicted variance sits at the eps_var floor it is treated
/// as a constant.
std::vector<double> full_kl_grad(const Pmf& target, std::span<const double> logits,
                                 const LabelGrid& grid, const NumericPolicy& policy = {},
                                 ComponentMask mask = {});

/// d(total)/d(logits) of reference_loss. The L1 subgradient at mu_hat == mu is 0.
std::vector<double> reference_grad(const Pmf& target, std::span<const double> logits,
                                   const LabelGrid& grid, const ReferenceLossConfig& cfg,
                                   const NumericPolicy& policy = {});

/// Loss and logit gradient in one pass; what the trainer calls per sample.
/// `grad` must have the same length as `logits`.
LossBreakdown loss_and_grad(const Pmf& target, std::span<const double> logits,
                            const LabelGrid& grid, const LossConfig& cfg, std::span<double> grad);

}  // namespace fkl
