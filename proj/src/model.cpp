#include "fkl/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fkl/kernels.hpp"
#include "fkl/rng.hpp"
#include "mlp_detail.hpp"

namespace fkl {

std::size_t param_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

std::size_t MlpParams::weight_offset(std::size_t layer) const {
  return param_count(std::span<const std::size_t>(dims).first(layer + 1));
}

MlpParams init_mlp(std::vector<std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_mlp: need at least input and output dims");
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("init_mlp: layer width must be >= 1");
  }
  MlpParams p;
  p.dims = std::move(dims);
  p.values.assign(param_count(p.dims), 0.0);
  Rng rng(seed);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.dims[l]));
    for (double& w : p.weights(l)) w = rng.uniform(-bound, bound);
  }
  return p;
}

std::vector<double> forward(const MlpParams& params, std::span<const double> features) {
  std::vector<double> acts(detail::activation_size(params));
  detail::forward_cached(params, features, acts);
  return {acts.end() - static_cast<std::ptrdiff_t>(params.output_dim()), acts.end()};
}

double predict(const MlpParams& params, std::span<const double> features, const LabelGrid& grid) {
  const std::vector<double> logits = forward(params, features);
  return moments(softmax(logits), grid).mu;
}

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_params: cannot open " + path.string());
  out << "fkl-mlp 1\ndims";
  for (std::size_t d : params.dims) out << ' ' << d;
  out << '\n';
  char buf[32];
  for (double v : params.values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
  if (!out) throw std::runtime_error("save_params: write failed for " + path.string());
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_params: cannot open " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "fkl-mlp" || version != 1) {
    throw std::runtime_error("load_params: not an fkl-mlp v1 checkpoint");
  }
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream dims_line(line);
  std::string tag;
  dims_line >> tag;
  if (tag != "dims") throw std::runtime_error("load_params: missing dims line");
  MlpParams p;
  for (std::size_t d; dims_line >> d;) p.dims.push_back(d);
  if (p.dims.size() < 2) throw std::runtime_error("load_params: invalid dims");
  p.values.resize(param_count(p.dims));
  for (double& v : p.values) {
    if (!std::getline(in, line)) throw std::runtime_error("load_params: truncated checkpoint");
    v = std::strtod(line.c_str(), nullptr);
  }
  return p;
}

AdamState AdamState::for_params(const MlpParams& params, double lr, double beta1, double beta2,
                                double epsilon) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.m.assign(params.values.size(), 0.0);
  s.v.assign(params.values.size(), 0.0);
  return s;
}

void adam_update(std::span<double> values, std::span<const double> grad, AdamState& state) {
  if (grad.size() != values.size() || state.m.size() != values.size() ||
      state.v.size() != values.size()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw std::invalid_argument("TrainConfig: lr_decay_factor must be in (0, 1]");
  }
  if (lr_decay_every < 1) throw std::invalid_argument("TrainConfig: lr_decay_every must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("TrainConfig: hidden widths must be >= 1");
  }
  loss.policy.validate();
  loss.reference.validate();
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  const auto drops = static_cast<double>(epoch / cfg.lr_decay_every);
  return cfg.lr * std::pow(cfg.lr_decay_factor, drops);
}

LossBreakdown train_step(MlpParams& params, AdamState& opt, std::span<const Sample* const> batch,
                         const LabelGrid& grid, const LossConfig& cfg, BatchWorkspace& ws) {
  ws.gradient.resize(params.values.size());
  const LossBreakdown mean = kernels::batch_gradient(params, batch, grid, cfg, ws, ws.gradient);
  adam_update(params.values, ws.gradient, opt);
  return mean;
}

Metrics evaluate(const MlpParams& params, const Dataset& ds, const LossConfig& cfg) {
  return kernels::evaluate(params, ds, cfg);
}

MlpParams fit(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
              const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0 || val.size() == 0) throw std::invalid_argument("fit: empty split");

  std::vector<std::size_t> dims{train.feature_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train.grid.size());
  MlpParams params = init_mlp(std::move(dims), cfg.seed);
  AdamState opt = AdamState::for_params(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);

  // Separate stream so batch order does not depend on how many draws init used.
  Rng shuffler(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<const Sample*> order(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) order[i] = &train.samples[i];

  BatchWorkspace ws;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = lr_at(epoch, cfg);
    shuffler.shuffle(std::span<const Sample*>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      train_step(params, opt, std::span<const Sample* const>(order).subspan(start, count),
                 train.grid, cfg.loss, ws);
    }
    if (on_epoch) {
      Metrics tm = evaluate(params, train, cfg.loss);
      Metrics vm = evaluate(params, val, cfg.loss);
      tm.epoch = vm.epoch = epoch + 1;
      tm.split = Split::train;
      vm.split = Split::val;
      on_epoch(tm, vm);
    }
  }
  return params;
}

}  // namespace fkl
