#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkl/data.hpp"
#include "fkl/grid.hpp"
#include "fkl/losses.hpp"

namespace fkl {

/// Raised when a loss or gradient turns non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully connected network [d_in, hidden..., n_bins]: ReLU on hidden layers,
/// raw logits out. All weights and biases live in one flat vector; layer l
/// stores W_l (dims[l] x dims[l+1], row-major, input index major) followed by
/// b_l (dims[l+1]).
struct MlpParams {
  std::vector<std::size_t> dims;
  std::vector<double> values;

  std::size_t layer_count() const { return dims.size() - 1; }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + dims[layer] * dims[layer + 1];
  }

  std::span<const double> weights(std::size_t layer) const {
    return {values.data() + weight_offset(layer), dims[layer] * dims[layer + 1]};
  }
  std::span<double> weights(std::size_t layer) {
    return {values.data() + weight_offset(layer), dims[layer] * dims[layer + 1]};
  }
  std::span<const double> biases(std::size_t layer) const {
    return {values.data() + bias_offset(layer), dims[layer + 1]};
  }
  std::span<double> biases(std::size_t layer) {
    return {values.data() + bias_offset(layer), dims[layer + 1]};
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

std::size_t param_count(std::span<const std::size_t> dims);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded
/// generator, biases zero.
MlpParams init_mlp(std::vector<std::size_t> dims, std::uint64_t seed);

std::vector<double> forward(const MlpParams& params, std::span<const double> features);

/// Expectation of the predicted pmf on `grid`.
double predict(const MlpParams& params, std::span<const double> features, const LabelGrid& grid);

/// Text checkpoint: "fkl-mlp 1", a dims line, then one value per line in
/// %.17g so that loading reproduces every bit.
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_params(const MlpParams& params, double lr = 1e-3, double beta1 = 0.9,
                              double beta2 = 0.999, double epsilon = 1e-8);
};

/// One bias-corrected Adam update of `values` with gradient `grad`.
void adam_update(std::span<double> values, std::span<const double> grad, AdamState& state);

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay_factor = 0.1;
  std::size_t lr_decay_every = 30;
  std::vector<std::size_t> hidden = {64, 64};
  LossConfig loss;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Step-decayed learning rate for a 0-based epoch: lr * factor^floor(epoch / every).
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct Metrics {
  std::size_t epoch = 0;
  Split split = Split::train;
  LossBreakdown loss;
  double mae = 0.0;
};

/// Reusable buffers for the batch kernels; sized on first use.
struct BatchWorkspace {
  std::vector<double> activations;
  std::vector<double> deltas;
  std::vector<LossBreakdown> losses;
  std::vector<double> gradient;
};

/// Averaged loss over the batch, then one Adam step on the averaged gradient.
/// Throws TrainingError naming the offending sample if anything is non-finite.
LossBreakdown train_step(MlpParams& params, AdamState& opt, std::span<const Sample* const> batch,
                         const LabelGrid& grid, const LossConfig& cfg, BatchWorkspace& ws);

/// Mean loss breakdown and MAE over `ds`; epoch and split are left to the caller.
Metrics evaluate(const MlpParams& params, const Dataset& ds, const LossConfig& cfg);

using EpochCallback = std::function<void(const Metrics& train, const Metrics& val)>;

/// Full training run: init from cfg.seed, per-epoch seeded shuffling into
/// mini-batches, lr schedule, and train/val evaluation after every epoch
/// (epochs are reported 1-based).
MlpParams fit(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
              const EpochCallback& on_epoch = {});

}  // namespace fkl
