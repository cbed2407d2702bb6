// fkl: experiment driver for the full-KL and reference label-distribution losses.
//
//   fkl run <config.json>            train every seed, write metrics + summary
//   fkl compare <a.json> <b.json>    paired per-seed final validation MAE
//   fkl verify                       gradient / oracle / invariance checks
//   fkl gen-data <config.json> <out.csv>
//
// Exit codes: 0 success, 1 configuration error, 2 verification or training failure.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fkl/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kFailure = 2;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw fkl::runner::ConfigError("--seeds: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw fkl::runner::ConfigError("--seeds: empty list");
  return seeds;
}

struct CommonFlags {
  std::string out_dir;
  std::string seeds;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out-dir", flags.out_dir, "Override the output directory");
  cmd->add_option("--seeds", flags.seeds, "Comma-separated seed list override");
  cmd->add_flag("--quiet", flags.quiet, "Only print errors");
}

fkl::runner::RunConfig load_with_overrides(const std::string& path, const CommonFlags& flags,
                                           const std::string& out_subdir = {}) {
  fkl::runner::RunConfig cfg = fkl::runner::load_config(path);
  if (!flags.out_dir.empty()) {
    cfg.output_dir = out_subdir.empty() ? std::filesystem::path(flags.out_dir)
                                        : std::filesystem::path(flags.out_dir) / out_subdir;
  }
  if (!flags.seeds.empty()) cfg.seeds = parse_seed_list(flags.seeds);
  cfg.validate();
  return cfg;
}

fkl::runner::Logger make_logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cout << line << std::endl; };
}

int cmd_run(const std::string& config, const CommonFlags& flags) {
  const auto cfg = load_with_overrides(config, flags);
  const auto result = fkl::runner::run_experiment(cfg, make_logger(flags.quiet));
  if (!flags.quiet) std::cout << "summary: " << result.summary_file.string() << "\n";
  if (!result.all_ok()) {
    for (const auto& s : result.seeds) {
      if (!s.ok) std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
    }
    return kFailure;
  }
  return kOk;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const CommonFlags& flags) {
  const auto a = load_with_overrides(a_path, flags, "a");
  const auto b = load_with_overrides(b_path, flags, "b");
  const std::filesystem::path report_dir =
      flags.out_dir.empty() ? a.output_dir.parent_path() / "compare" : std::filesystem::path(flags.out_dir);
  const auto report = fkl::runner::compare(a, b, report_dir, make_logger(flags.quiet));
  if (!flags.quiet) {
    std::printf("MAE a (%s): %.5f +- %.5f\nMAE b (%s): %.5f +- %.5f\nrelative difference: %+.5f\n",
                report.family_a.c_str(), report.mean_a, report.std_a, report.family_b.c_str(),
                report.mean_b, report.std_b, report.rel_diff);
    std::printf("report: %s\n", (report_dir / "compare.txt").string().c_str());
  }
  return report.ok ? kOk : kFailure;
}

int cmd_verify(bool quiet) {
  const auto report = fkl::runner::verify_suite();
  if (!quiet || !report.passed()) std::cout << report.to_text();
  return report.passed() ? kOk : kFailure;
}

int cmd_gen_data(const std::string& config, const std::string& out, bool quiet) {
  const auto cfg = fkl::runner::load_config(config);
  fkl::Dataset ds;
  try {
    ds = fkl::runner::build_dataset(cfg);
  } catch (const std::exception& e) {
    throw fkl::runner::ConfigError(std::string("dataset: ") + e.what());
  }
  fkl::write_csv(ds, out);
  if (!quiet) std::cout << "wrote " << ds.size() << " samples to " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-KL label distribution learning experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags, compare_flags;
  std::string run_config, a_config, b_config, gen_config, gen_out;
  bool verify_quiet = false, gen_quiet = false;

  auto* run = app.add_subcommand("run", "Train all seeds of one configuration");
  run->add_option("config", run_config, "Run configuration (JSON)")->required();
  add_common(run, run_flags);

  auto* compare = app.add_subcommand("compare", "Run two configurations and pair final MAE per seed");
  compare->add_option("a", a_config, "First configuration")->required();
  compare->add_option("b", b_config, "Second (baseline) configuration")->required();
  add_common(compare, compare_flags);

  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  verify->add_flag("--quiet", verify_quiet, "Only print on failure");

  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset as CSV");
  gen->add_option("config", gen_config, "Run configuration (JSON)")->required();
  gen->add_option("out", gen_out, "Output CSV path")->required();
  gen->add_flag("--quiet", gen_quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_config, run_flags);
    if (*compare) return cmd_compare(a_config, b_config, compare_flags);
    if (*verify) return cmd_verify(verify_quiet);
    if (*gen) return cmd_gen_data(gen_config, gen_out, gen_quiet);
  } catch (const fkl::runner::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kConfigError;
}
