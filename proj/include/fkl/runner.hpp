#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fkl/data.hpp"
#include "fkl/grid.hpp"
#include "fkl/losses.hpp"
#include "fkl/model.hpp"

namespace fkl::runner {

/// Raised for invalid or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double start = 0.0;
  double stop = 100.0;
  double step = 1.0;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct DatasetSource {
  enum class Kind { synthetic, csv };
  Kind kind = Kind::synthetic;
  SyntheticSpec synthetic;
  std::filesystem::path csv_path;  // resolved against the config file's directory

  friend bool operator==(const DatasetSource&, const DatasetSource&) = default;
};

/// Everything one experiment needs. JSON layout:
///   { "dataset": {"source": "synthetic", "n", "d_in", "sigma_range": [lo, hi], "seed"}
///              | {"source": "csv", "path"},
///     "grid": {"start", "stop", "step"},
///     "split": {"val_fraction", "seed"},
///     "train": {"epochs", "batch_size", "lr", "beta1", "beta2", "epsilon",
///               "lr_decay_factor", "lr_decay_every", "hidden"},
///     "loss": {"family": "full_kl" | "reference", "lambda", "eps_log", "eps_var"},
///     "output_dir", "seeds": [...] }
/// Omitted keys take the defaults below; unknown keys are rejected.
struct RunConfig {
  DatasetSource dataset;
  GridSpec grid;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;
  TrainConfig train;  // train.seed is overwritten per run
  std::filesystem::path output_dir = "runs/out";  // relative: resolved against the config file
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  void validate() const;
};

RunConfig parse_config(const std::string& json_text,
                       const std::filesystem::path& base_dir = std::filesystem::path{});
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (all keys, fixed order), as written next to every output.
std::string to_json(const RunConfig& cfg);

/// Materializes the configured dataset on the configured grid.
Dataset build_dataset(const RunConfig& cfg);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::filesystem::path metrics_file;
  std::vector<Metrics> history;  // train and val rows, in file order
};

struct ExperimentResult {
  std::vector<SeedOutcome> seeds;
  std::filesystem::path summary_file;
  bool all_ok() const;
};

using Logger = std::function<void(const std::string&)>;

/// Trains every seed (concurrently when OpenMP has threads), writing
/// metrics_seed<k>.csv per seed, then summary.csv recomputed from those files,
/// and the canonical config.json. A diverging seed is recorded, not fatal.
ExperimentResult run_experiment(const RunConfig& cfg, const Logger& log = {});

/// Per-epoch mean and sample std across seeds, read back from per-seed files.
struct SummaryRow {
  std::size_t epoch = 0;
  std::size_t n_seeds = 0;
  // [split][column]: split 0 = train, 1 = val; columns l_ld, l_exp, l_smooth, total, mae.
  double mean[2][5] = {};
  double std[2][5] = {};
};

std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& metrics_files);

/// Rows of a metrics file, parsed back exactly.
std::vector<Metrics> read_metrics(const std::filesystem::path& path, LossFamily* family = nullptr);

struct ComparisonRow {
  std::uint64_t seed = 0;
  double mae_a = 0.0;
  double mae_b = 0.0;
  double rel_diff = 0.0;  // (a - b) / b
};

struct ComparisonReport {
  std::string family_a, family_b;
  std::vector<ComparisonRow> rows;
  double mean_a = 0.0, std_a = 0.0;
  double mean_b = 0.0, std_b = 0.0;
  double rel_diff = 0.0;  // (mean_a - mean_b) / mean_b
  bool ok = true;         // every seed of both runs finished
};

/// Runs both configs and pairs their final-epoch validation MAE per seed.
/// Writes compare.csv and compare.txt into `report_dir`.
ComparisonReport compare(const RunConfig& a, const RunConfig& b,
                         const std::filesystem::path& report_dir, const Logger& log = {});

/// Same pairing from already finished runs (no training).
ComparisonReport compare_results(const RunConfig& a, const ExperimentResult& ra,
                                 const RunConfig& b, const ExperimentResult& rb);

void write_comparison(const ComparisonReport& report, const RunConfig& a, const RunConfig& b,
                      const std::filesystem::path& report_dir);

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
  std::string to_text() const;
};

using GaussianKlFn = std::function<double(const Moments&, const Moments&, const NumericPolicy&)>;

struct VerifyOptions {
  std::size_t instances = 100;
  std::uint64_t seed = 20220101;
  /// Closed form under test; swapped out by mutation tests.
  GaussianKlFn gaussian_kl;
};

// Individual suite pieces, also used by the acceptance suite.
CheckResult check_gaussian_kl_sweep(const GaussianKlFn& closed_form);
CheckResult check_head_gradients(LossFamily family, std::size_t n, std::size_t instances,
                                 std::uint64_t seed);
CheckResult check_network_gradient(LossFamily family, std::uint64_t seed);
CheckResult check_affine_invariance(std::uint64_t seed);
CheckResult check_identities();
CheckResult check_nonnegativity(std::size_t instances, std::uint64_t seed);

/// Gradient checks (both families, n in {2, 5, 101}), the network-level
/// gradient check, the Gaussian-KL oracle sweep, and the invariance suite.
VerifyReport verify_suite(const VerifyOptions& options = {});

}  // namespace fkl::runner
