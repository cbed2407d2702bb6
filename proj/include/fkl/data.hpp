#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fkl/grid.hpp"

namespace fkl {

/// One annotated item: a feature vector and a normal label distribution given
/// by its (mean, std), materialized as a pmf on the dataset grid.
struct Sample {
  std::string id;
  std::vector<double> features;
  double target_mu = 0.0;
  double target_sigma = 0.0;
  Pmf target_pmf{std::vector<double>{1.0}};
};

enum class Split { all, train, val };

struct Dataset {
  LabelGrid grid = LabelGrid::uniform(0.0, 1.0, 1.0);
  std::vector<Sample> samples;
  Split split = Split::all;

  std::size_t size() const { return samples.size(); }
  std::size_t feature_dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
};

/// Builds a sample on `grid`; throws std::invalid_argument if sigma is below
/// half the grid spacing or mu lies outside the grid span.
Sample make_sample(std::string id, std::vector<double> features, double mu, double sigma,
                   const LabelGrid& grid);

struct SyntheticSpec {
  std::size_t n = 5000;
  std::size_t d_in = 16;
  double sigma_lo = 2.0;
  double sigma_hi = 6.0;
  std::uint64_t seed = 1;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Features uniform in [-1, 1]^d_in; target mean is a fixed smooth function
/// of the features (affine plus sinusoidal terms, coefficients drawn from the
/// seed) mapped into [min + 3 sigma_hi, max - 3 sigma_hi]; sigma is uniform in
/// [sigma_lo, sigma_hi], independent of the features.
Dataset gen_synthetic(const SyntheticSpec& spec, const LabelGrid& grid);

/// Rows whose mean lies within 3 sigma of a grid edge are accepted but listed
/// here (1-based data row numbers), since their target pmf is truncated.
struct LoadReport {
  std::vector<std::size_t> truncated_rows;
};

/// Reads `id,f0,...,f{d-1},mean,std`. Throws std::runtime_error naming the
/// offending row on any malformed or invalid row.
Dataset load_csv(const std::filesystem::path& path, const LabelGrid& grid,
                 LoadReport* report = nullptr);

/// Writes the same schema with round-trip exact number formatting.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Seeded shuffle, then the first round(n * val_fraction) items go to
/// validation. Both parts keep the original relative order of their items.
std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction, std::uint64_t seed);

}  // namespace fkl
