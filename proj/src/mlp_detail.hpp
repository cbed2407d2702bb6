#pragma once

// Forward/backward helpers shared by model.cpp and kernels.cpp.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "fkl/model.hpp"

namespace fkl::detail {

/// Sum of all layer widths: length of one sample's activation buffer
/// [a_0 = input, a_1, ..., a_L = logits].
inline std::size_t activation_size(const MlpParams& p) {
  std::size_t n = 0;
  for (std::size_t d : p.dims) n += d;
  return n;
}

/// Length of one sample's delta buffer [delta_1, ..., delta_L].
inline std::size_t delta_size(const MlpParams& p) { return activation_size(p) - p.dims.front(); }

inline std::size_t activation_offset(const MlpParams& p, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += p.dims[l];
  return off;
}

/// Fills `acts`; hidden activations are stored after the ReLU. Throws
/// TrainingError on non-finite values.
inline void forward_cached(const MlpParams& p, std::span<const double> x, std::span<double> acts) {
  if (x.size() != p.input_dim()) {
    throw std::invalid_argument("forward: expected " + std::to_string(p.input_dim()) +
                                " features, got " + std::to_string(x.size()));
  }
  std::copy(x.begin(), x.end(), acts.begin());
  std::size_t in_off = 0;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const std::size_t n_in = p.dims[l];
    const std::size_t n_out = p.dims[l + 1];
    const std::size_t out_off = in_off + n_in;
    const double* w = p.values.data() + p.weight_offset(l);
    const double* b = p.values.data() + p.bias_offset(l);
    double* out = acts.data() + out_off;
    const double* in = acts.data() + in_off;
    for (std::size_t j = 0; j < n_out; ++j) out[j] = b[j];
    for (std::size_t i = 0; i < n_in; ++i) {
      const double a = in[i];
      if (a == 0.0) continue;
      const double* row = w + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) out[j] += a * row[j];
    }
    const bool hidden = l + 1 < p.layer_count();
    for (std::size_t j = 0; j < n_out; ++j) {
      if (!std::isfinite(out[j])) {
        throw TrainingError("forward: non-finite activation in layer " + std::to_string(l + 1));
      }
      if (hidden && out[j] < 0.0) out[j] = 0.0;
    }
    in_off = out_off;
  }
}

/// Given the logit gradient in the last slot of `deltas`, propagates it down
/// to delta_1 (ReLU derivative taken from the stored activation).
inline void backprop_deltas(const MlpParams& p, std::span<const double> acts,
                            std::span<double> deltas) {
  const std::size_t L = p.layer_count();
  // delta_l occupies deltas[activation_offset(l) - dims[0], ...).
  for (std::size_t l = L; l >= 2; --l) {
    const std::size_t n_in = p.dims[l - 1];
    const std::size_t n_out = p.dims[l];
    const double* w = p.values.data() + p.weight_offset(l - 1);
    const double* upper = deltas.data() + activation_offset(p, l) - p.dims[0];
    double* lower = deltas.data() + activation_offset(p, l - 1) - p.dims[0];
    const double* a = acts.data() + activation_offset(p, l - 1);
    for (std::size_t i = 0; i < n_in; ++i) {
      if (a[i] <= 0.0) {
        lower[i] = 0.0;
        continue;
      }
      const double* row = w + i * n_out;
      double s = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) s += row[j] * upper[j];
      lower[i] = s;
    }
  }
}

}  // namespace fkl::detail
