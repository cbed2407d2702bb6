#include "fkl/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "mlp_detail.hpp"

namespace fkl::kernels {
namespace {

// Forward pass, loss head, and backprop of one sample into its slices of the
// workspace buffers.
LossBreakdown sample_pass(const MlpParams& params, const Sample& sample, const LabelGrid& grid,
                          const LossConfig& cfg, std::span<double> acts, std::span<double> deltas,
                          std::size_t index) {
  try {
    detail::forward_cached(params, sample.features, acts);
  } catch (const TrainingError& e) {
    throw TrainingError("sample " + std::to_string(index) + ": " + e.what());
  }
  const std::size_t n_out = params.output_dim();
  const auto logits = acts.last(n_out);
  const auto head = deltas.last(n_out);
  const LossBreakdown loss = loss_and_grad(sample.target_pmf, logits, grid, cfg, head);
  bool finite = std::isfinite(loss.total);
  for (double g : head) finite = finite && std::isfinite(g);
  if (!finite) {
    throw TrainingError("sample " + std::to_string(index) + ": non-finite loss or gradient");
  }
  detail::backprop_deltas(params, acts, deltas);
  return loss;
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x) {
  sum.family = x.family;
  sum.l_ld += x.l_ld;
  sum.l_exp += x.l_exp;
  sum.l_smooth += x.l_smooth;
  sum.total += x.total;
}

LossBreakdown scaled(LossBreakdown sum, std::size_t count) {
  const auto n = static_cast<double>(count);
  sum.l_ld /= n;
  sum.l_exp /= n;
  sum.l_smooth /= n;
  sum.total /= n;
  return sum;
}

void check_batch(const MlpParams& params, std::span<const Sample* const> batch,
                 std::span<double> grad_out) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  if (grad_out.size() != params.values.size()) {
    throw std::invalid_argument("batch_gradient: gradient buffer has wrong length");
  }
}

}  // namespace

LossBreakdown batch_gradient(const MlpParams& params, std::span<const Sample* const> batch,
                             const LabelGrid& grid, const LossConfig& cfg, BatchWorkspace& ws,
                             std::span<double> grad_out) {
  check_batch(params, batch, grad_out);
  const std::size_t n_act = detail::activation_size(params);
  const std::size_t n_delta = detail::delta_size(params);
  const auto count = static_cast<std::ptrdiff_t>(batch.size());
  ws.activations.resize(batch.size() * n_act);
  ws.deltas.resize(batch.size() * n_delta);
  ws.losses.resize(batch.size());

  // Phase 1: independent per-sample passes.
  std::string error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto su = static_cast<std::size_t>(s);
    try {
      ws.losses[su] = sample_pass(params, *batch[su], grid, cfg,
                                  std::span<double>(ws.activations).subspan(su * n_act, n_act),
                                  std::span<double>(ws.deltas).subspan(su * n_delta, n_delta), su);
    } catch (const std::exception& e) {
#pragma omp critical(fkl_batch_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw TrainingError(error);

  // Phase 2: every parameter sums its per-sample contributions in batch order.
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const std::size_t n_in = params.dims[l];
    const std::size_t n_out = params.dims[l + 1];
    const std::size_t a_off = detail::activation_offset(params, l);
    const std::size_t d_off = detail::activation_offset(params, l + 1) - params.dims[0];
    double* gw = grad_out.data() + params.weight_offset(l);
    double* gb = grad_out.data() + params.bias_offset(l);
    const auto rows = static_cast<std::ptrdiff_t>(n_in + 1);  // last row: biases
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto i = static_cast<std::size_t>(r);
      double* acc = i < n_in ? gw + i * n_out : gb;
      for (std::size_t j = 0; j < n_out; ++j) acc[j] = 0.0;
      for (std::size_t s = 0; s < batch.size(); ++s) {
        const double* delta = ws.deltas.data() + s * n_delta + d_off;
        if (i < n_in) {
          const double a = ws.activations[s * n_act + a_off + i];
          for (std::size_t j = 0; j < n_out; ++j) acc[j] += a * delta[j];
        } else {
          for (std::size_t j = 0; j < n_out; ++j) acc[j] += delta[j];
        }
      }
      for (std::size_t j = 0; j < n_out; ++j) acc[j] *= inv;
    }
  }

  LossBreakdown sum;
  for (const LossBreakdown& x : ws.losses) accumulate(sum, x);
  return scaled(sum, batch.size());
}

LossBreakdown batch_gradient_serial(const MlpParams& params, std::span<const Sample* const> batch,
                                    const LabelGrid& grid, const LossConfig& cfg,
                                    std::span<double> grad_out) {
  check_batch(params, batch, grad_out);
  std::vector<double> acts(detail::activation_size(params));
  std::vector<double> deltas(detail::delta_size(params));
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  LossBreakdown sum;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    accumulate(sum, sample_pass(params, *batch[s], grid, cfg, acts, deltas, s));
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
      const std::size_t n_in = params.dims[l];
      const std::size_t n_out = params.dims[l + 1];
      const double* a = acts.data() + detail::activation_offset(params, l);
      const double* delta =
          deltas.data() + detail::activation_offset(params, l + 1) - params.dims[0];
      double* gw = grad_out.data() + params.weight_offset(l);
      double* gb = grad_out.data() + params.bias_offset(l);
      for (std::size_t i = 0; i < n_in; ++i) {
        for (std::size_t j = 0; j < n_out; ++j) gw[i * n_out + j] += a[i] * delta[j];
      }
      for (std::size_t j = 0; j < n_out; ++j) gb[j] += delta[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad_out) g *= inv;
  return scaled(sum, batch.size());
}

namespace {

struct SampleEval {
  LossBreakdown loss;
  double abs_error = 0.0;
};

SampleEval eval_sample(const MlpParams& params, const Sample& s, const LabelGrid& grid,
                       const LossConfig& cfg) {
  const std::vector<double> logits = forward(params, s.features);
  SampleEval out;
  out.loss = compute_loss(s.target_pmf, logits, grid, cfg);
  out.abs_error = std::abs(moments(softmax(logits), grid).mu - s.target_mu);
  return out;
}

Metrics reduce(const std::vector<SampleEval>& evals, const Dataset& ds) {
  Metrics m;
  m.split = ds.split;
  double abs_sum = 0.0;
  for (const SampleEval& e : evals) {
    accumulate(m.loss, e.loss);
    abs_sum += e.abs_error;
  }
  m.loss = scaled(m.loss, evals.size());
  m.mae = abs_sum / static_cast<double>(evals.size());
  return m;
}

}  // namespace

Metrics evaluate(const MlpParams& params, const Dataset& ds, const LossConfig& cfg) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<SampleEval> evals(ds.size());
  const auto count = static_cast<std::ptrdiff_t>(ds.size());
  std::string error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    try {
      evals[iu] = eval_sample(params, ds.samples[iu], ds.grid, cfg);
    } catch (const std::exception& e) {
#pragma omp critical(fkl_eval_error)
      if (error.empty()) error = "sample " + std::to_string(iu) + ": " + e.what();
    }
  }
  if (!error.empty()) throw TrainingError("evaluate: " + error);
  return reduce(evals, ds);
}

Metrics evaluate_serial(const MlpParams& params, const Dataset& ds, const LossConfig& cfg) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<SampleEval> evals(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    evals[i] = eval_sample(params, ds.samples[i], ds.grid, cfg);
  }
  return reduce(evals, ds);
}

}  // namespace fkl::kernels
