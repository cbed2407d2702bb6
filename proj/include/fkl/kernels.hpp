#pragma once

// Batch kernels behind train_step and evaluate. Each has an OpenMP version and
// a single-threaded reference; both reduce per-sample contributions in sample
// order, so their results are bit-identical for any thread count.

#include <span>

#include "fkl/model.hpp"

namespace fkl::kernels {

/// Writes the mean parameter gradient over `batch` into `grad_out` (length
/// param_count) and returns the mean loss breakdown.
LossBreakdown batch_gradient(const MlpParams& params, std::span<const Sample* const> batch,
                             const LabelGrid& grid, const LossConfig& cfg, BatchWorkspace& ws,
                             std::span<double> grad_out);

LossBreakdown batch_gradient_serial(const MlpParams& params, std::span<const Sample* const> batch,
                                    const LabelGrid& grid, const LossConfig& cfg,
                                    std::span<double> grad_out);

Metrics evaluate(const MlpParams& params, const Dataset& ds, const LossConfig& cfg);
Metrics evaluate_serial(const MlpParams& params, const Dataset& ds, const LossConfig& cfg);

}  // namespace fkl::kernels
