#include "fkl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fkl {

void NumericPolicy::validate() const {
  if (!(eps_log > 0.0) || !std::isfinite(eps_log)) {
    throw std::invalid_argument("NumericPolicy: eps_log must be positive");
  }
  if (!(eps_var > 0.0) || !std::isfinite(eps_var)) {
    throw std::invalid_argument("NumericPolicy: eps_var must be positive");
  }
}

LabelGrid LabelGrid::uniform(double start, double stop, double step) {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step)) {
    throw std::invalid_argument("make_grid: non-finite argument");
  }
  if (!(step > 0.0)) {
    throw std::invalid_argument("make_grid: step must be positive");
  }
  if (!(stop > start)) {
    throw std::invalid_argument("make_grid: stop must exceed start");
  }
  const double intervals = (stop - start) / step;
  const double rounded = std::round(intervals);
  if (std::abs(intervals - rounded) > 1e-9 * std::max(1.0, rounded)) {
    throw std::invalid_argument("make_grid: (stop - start) / step is not integral");
  }
  const auto count = static_cast<std::size_t>(rounded) + 1;
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = start + static_cast<double>(i) * step;
  }
  values.back() = stop;
  return LabelGrid(std::move(values), step);
}

LabelGrid LabelGrid::from_values(std::vector<double> values) {
  if (values.size() < 2) {
    throw std::invalid_argument("LabelGrid: need at least two bins");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("LabelGrid: non-finite bin value");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw std::invalid_argument("LabelGrid: values must be strictly increasing");
    }
  }
  const double step = values[1] - values[0];
  bool uniform = true;
  for (std::size_t i = 1; i + 1 < values.size() && uniform; ++i) {
    const double gap = values[i + 1] - values[i];
    uniform = std::abs(gap - step) <= 1e-12 * std::max(std::abs(step), std::abs(values[i + 1]));
  }
  std::optional<double> spacing;
  if (uniform) spacing = step;
  return LabelGrid(std::move(values), spacing);
}

double LabelGrid::spacing() const {
  if (!spacing_) throw std::logic_error("LabelGrid: grid is not uniform");
  return *spacing_;
}

Pmf::Pmf(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("Pmf: empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("Pmf: entry " + std::to_string(i) + " is negative or non-finite");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("Pmf: probabilities sum to " + std::to_string(sum));
  }
}

Pmf Pmf::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Pmf::uniform: n must be positive");
  return Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Pmf Pmf::one_hot(std::size_t n, std::size_t k) {
  if (k >= n) throw std::invalid_argument("Pmf::one_hot: index out of range");
  std::vector<double> probs(n, 0.0);
  probs[k] = 1.0;
  return Pmf(std::move(probs));
}

Pmf softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  double max_logit = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("softmax: non-finite logit");
    max_logit = std::max(max_logit, z);
  }
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  // sum >= 1 because the max entry contributes exp(0).
  const double inv = 1.0 / sum;
  for (double& p : probs) p *= inv;
  return Pmf(std::move(probs), Pmf::Unchecked{});
}

Moments moments(const Pmf& p, const LabelGrid& grid) {
  if (p.size() != grid.size()) {
    throw std::invalid_argument("moments: pmf has " + std::to_string(p.size()) +
                                " bins, grid has " + std::to_string(grid.size()));
  }
  double mu = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mu += grid[i] * p[i];
  double var = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = grid[i] - mu;
    var += d * d * p[i];
  }
  return {mu, var};
}

Pmf discretize_gaussian(double mu, double sigma, const LabelGrid& grid) {
  if (!std::isfinite(mu) || !std::isfinite(sigma)) {
    throw std::invalid_argument("discretize_gaussian: non-finite mu or sigma");
  }
  if (!grid.is_uniform()) {
    throw std::invalid_argument("discretize_gaussian: grid must be uniform");
  }
  if (sigma < min_sigma(grid)) {
    throw std::invalid_argument("discretize_gaussian: sigma " + std::to_string(sigma) +
                                " below floor " + std::to_string(min_sigma(grid)));
  }
  if (mu < grid.front() - 5.0 * sigma || mu > grid.back() + 5.0 * sigma) {
    throw std::invalid_argument("discretize_gaussian: mu " + std::to_string(mu) +
                                " lies more than 5 sigma outside the grid");
  }
  std::vector<double> probs(grid.size());
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid[i] - mu;
    probs[i] = std::exp(-d * d * inv_two_var);
    sum += probs[i];
  }
  if (!(sum > 0.0)) {
    throw std::invalid_argument("discretize_gaussian: all mass underflowed");
  }
  for (double& p : probs) p /= sum;
  return Pmf(std::move(probs));
}

}  // namespace fkl
