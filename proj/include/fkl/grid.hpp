#pragma once

#include <optional>
#include <span>
#include <vector>

namespace fkl {

/// Numerical-stability constants shared by every loss and oracle.
/// All logarithms are natural.
struct NumericPolicy {
  double eps_log = 1e-12;  // floor for probabilities inside ln()
  double eps_var = 1e-8;   // floor for variances in denominators (label units^2)

  void validate() const;
};

/// Ordered bin centers of a discretized label range, e.g. ages 0..100.
class LabelGrid {
 public:
  /// Uniform grid start, start+step, ..., stop (both endpoints included).
  static LabelGrid uniform(double start, double stop, double step);

  /// Arbitrary strictly increasing bin centers. The grid is flagged uniform
  /// when all gaps agree with the first one within 1e-12 relative.
  static LabelGrid from_values(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

  bool is_uniform() const { return spacing_.has_value(); }
  /// Bin spacing; throws std::logic_error on a non-uniform grid.
  double spacing() const;

 private:
  LabelGrid(std::vector<double> values, std::optional<double> spacing)
      : values_(std::move(values)), spacing_(spacing) {}

  std::vector<double> values_;
  std::optional<double> spacing_;
};

inline LabelGrid make_grid(double start, double stop, double step) {
  return LabelGrid::uniform(start, stop, step);
}

/// Probability mass function: non-negative entries summing to 1 within 1e-9.
class Pmf {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates and takes ownership; throws std::invalid_argument.
  explicit Pmf(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  static Pmf uniform(std::size_t n);
  static Pmf one_hot(std::size_t n, std::size_t k);

  friend bool operator==(const Pmf&, const Pmf&) = default;

 private:
  struct Unchecked {};
  Pmf(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}
  friend Pmf softmax(std::span<const double> logits);

  std::vector<double> probs_;
};

struct Moments {
  double mu = 0.0;
  double var = 0.0;
};

/// Shift-invariant softmax: max is subtracted before exponentiation, so adding
/// a constant to every logit leaves the result bit-identical.
Pmf softmax(std::span<const double> logits);

/// mu = sum y_i p_i, var = sum (y_i - mu)^2 p_i (two-pass).
Moments moments(const Pmf& p, const LabelGrid& grid);

/// Normal density evaluated at the bin centers and renormalized.
/// Requires a uniform grid, sigma >= 0.5 * spacing, and mu no further than
/// 5 sigma outside [front, back].
Pmf discretize_gaussian(double mu, double sigma, const LabelGrid& grid);

/// Smallest admissible target sigma on `grid`.
inline double min_sigma(const LabelGrid& grid) { return 0.5 * grid.spacing(); }

}  // namespace fkl
