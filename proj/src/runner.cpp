#include "fkl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fkl::runner {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* split_name(Split s) { return s == Split::val ? "val" : "train"; }

double stddev(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string metrics_csv(std::uint64_t seed, const std::vector<Metrics>& rows, LossFamily family) {
  std::ostringstream out;
  out << "seed,epoch,split,l_ld,l_exp,l_smooth,total,mae\n";
  for (const Metrics& m : rows) {
    out << seed << ',' << m.epoch << ',' << split_name(m.split) << ',' << fmt(m.loss.l_ld) << ','
        << fmt(m.loss.l_exp) << ',';
    if (family == LossFamily::full_kl) out << fmt(m.loss.l_smooth);
    out << ',' << fmt(m.loss.total) << ',' << fmt(m.mae) << '\n';
  }
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("config: duplicate seeds");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("config: split.val_fraction must be in (0, 1)");
  }
  if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
  try {
    train.validate();
    const LabelGrid g = LabelGrid::uniform(grid.start, grid.stop, grid.step);
    if (dataset.kind == DatasetSource::Kind::synthetic) {
      const SyntheticSpec& s = dataset.synthetic;
      if (s.n < 2 || s.d_in < 1) throw ConfigError("config: dataset.n >= 2 and d_in >= 1 required");
      if (!(s.sigma_lo >= min_sigma(g)) || !(s.sigma_hi >= s.sigma_lo) ||
          !(s.sigma_hi <= (g.back() - g.front()) / 4.0)) {
        throw ConfigError("config: dataset.sigma_range outside [0.5*step, span/4]");
      }
    } else if (dataset.csv_path.empty()) {
      throw ConfigError("config: dataset.path is required for csv source");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(root, "config", {"dataset", "grid", "split", "train", "loss", "output_dir", "seeds"});
  RunConfig cfg;

  if (root.contains("dataset")) {
    const json& d = root["dataset"];
    reject_unknown(d, "dataset", {"source", "n", "d_in", "sigma_range", "seed", "path"});
    std::string source = "synthetic";
    read(d, "source", source, "dataset");
    if (source == "synthetic") {
      if (d.contains("path")) throw ConfigError("dataset: 'path' only valid for csv source");
      read(d, "n", cfg.dataset.synthetic.n, "dataset");
      read(d, "d_in", cfg.dataset.synthetic.d_in, "dataset");
      read(d, "seed", cfg.dataset.synthetic.seed, "dataset");
      if (d.contains("sigma_range")) {
        std::vector<double> range;
        read(d, "sigma_range", range, "dataset");
        if (range.size() != 2) throw ConfigError("dataset.sigma_range: expected [lo, hi]");
        cfg.dataset.synthetic.sigma_lo = range[0];
        cfg.dataset.synthetic.sigma_hi = range[1];
      }
    } else if (source == "csv") {
      for (const char* k : {"n", "d_in", "sigma_range", "seed"}) {
        if (d.contains(k)) throw ConfigError(std::string("dataset: '") + k + "' only valid for synthetic source");
      }
      cfg.dataset.kind = DatasetSource::Kind::csv;
      std::string path;
      read(d, "path", path, "dataset");
      cfg.dataset.csv_path = path.empty() || fs::path(path).is_absolute() ? fs::path(path)
                                                                          : base_dir / path;
    } else {
      throw ConfigError("dataset.source must be 'synthetic' or 'csv'");
    }
  }
  if (root.contains("grid")) {
    const json& g = root["grid"];
    reject_unknown(g, "grid", {"start", "stop", "step"});
    read(g, "start", cfg.grid.start, "grid");
    read(g, "stop", cfg.grid.stop, "grid");
    read(g, "step", cfg.grid.step, "grid");
  }
  if (root.contains("split")) {
    const json& s = root["split"];
    reject_unknown(s, "split", {"val_fraction", "seed"});
    read(s, "val_fraction", cfg.val_fraction, "split");
    read(s, "seed", cfg.split_seed, "split");
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    reject_unknown(t, "train", {"epochs", "batch_size", "lr", "beta1", "beta2", "epsilon",
                                "lr_decay_factor", "lr_decay_every", "hidden"});
    read(t, "epochs", cfg.train.epochs, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "lr", cfg.train.lr, "train");
    read(t, "beta1", cfg.train.beta1, "train");
    read(t, "beta2", cfg.train.beta2, "train");
    read(t, "epsilon", cfg.train.epsilon, "train");
    read(t, "lr_decay_factor", cfg.train.lr_decay_factor, "train");
    read(t, "lr_decay_every", cfg.train.lr_decay_every, "train");
    read(t, "hidden", cfg.train.hidden, "train");
  }
  if (root.contains("loss")) {
    const json& l = root["loss"];
    reject_unknown(l, "loss", {"family", "lambda", "eps_log", "eps_var"});
    std::string family = "full_kl";
    read(l, "family", family, "loss");
    try {
      cfg.train.loss.family = parse_loss_family(family);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("loss.family: ") + e.what());
    }
    if (l.contains("lambda") && cfg.train.loss.family != LossFamily::reference) {
      throw ConfigError("loss.lambda is only meaningful for the reference family");
    }
    read(l, "lambda", cfg.train.loss.reference.lambda, "loss");
    read(l, "eps_log", cfg.train.loss.policy.eps_log, "loss");
    read(l, "eps_var", cfg.train.loss.policy.eps_var, "loss");
  }
  if (root.contains("output_dir")) {
    std::string dir;
    read(root, "output_dir", dir, "config");
    cfg.output_dir = dir;
  }
  // Relative output dirs, like dataset paths, are anchored at the config file.
  if (cfg.output_dir.is_relative() && !base_dir.empty()) cfg.output_dir = base_dir / cfg.output_dir;
  read(root, "seeds", cfg.seeds, "config");
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string to_json(const RunConfig& cfg) {
  json dataset;
  if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
    const SyntheticSpec& s = cfg.dataset.synthetic;
    dataset = {{"source", "synthetic"}, {"n", s.n}, {"d_in", s.d_in},
               {"sigma_range", {s.sigma_lo, s.sigma_hi}}, {"seed", s.seed}};
  } else {
    dataset = {{"source", "csv"}, {"path", cfg.dataset.csv_path.string()}};
  }
  const TrainConfig& t = cfg.train;
  json loss = {{"family", to_string(t.loss.family)},
               {"eps_log", t.loss.policy.eps_log},
               {"eps_var", t.loss.policy.eps_var}};
  if (t.loss.family == LossFamily::reference) loss["lambda"] = t.loss.reference.lambda;
  json root = {
      {"dataset", dataset},
      {"grid", {{"start", cfg.grid.start}, {"stop", cfg.grid.stop}, {"step", cfg.grid.step}}},
      {"split", {{"val_fraction", cfg.val_fraction}, {"seed", cfg.split_seed}}},
      {"train",
       {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"lr", t.lr}, {"beta1", t.beta1},
        {"beta2", t.beta2}, {"epsilon", t.epsilon}, {"lr_decay_factor", t.lr_decay_factor},
        {"lr_decay_every", t.lr_decay_every}, {"hidden", t.hidden}}},
      {"loss", loss},
      {"output_dir", cfg.output_dir.string()},
      {"seeds", cfg.seeds}};
  return root.dump(2) + "\n";
}

Dataset build_dataset(const RunConfig& cfg) {
  const LabelGrid grid = LabelGrid::uniform(cfg.grid.start, cfg.grid.stop, cfg.grid.step);
  if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
    return gen_synthetic(cfg.dataset.synthetic, grid);
  }
  return load_csv(cfg.dataset.csv_path, grid);
}

bool ExperimentResult::all_ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.ok; });
}

ExperimentResult run_experiment(const RunConfig& cfg, const Logger& log) {
  cfg.validate();
  Dataset full;
  try {
    full = build_dataset(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  auto [train, val] = split(full, cfg.val_fraction, cfg.split_seed);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw std::runtime_error("cannot create output directory " + cfg.output_dir.string());
  }
  write_text(cfg.output_dir / "config.json", to_json(cfg));

  const LossFamily family = cfg.train.loss.family;
  ExperimentResult result;
  result.seeds.resize(cfg.seeds.size());
  const auto n_seeds = static_cast<std::ptrdiff_t>(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n_seeds; ++k) {
    SeedOutcome& out = result.seeds[static_cast<std::size_t>(k)];
    out.seed = cfg.seeds[static_cast<std::size_t>(k)];
    out.metrics_file = cfg.output_dir / ("metrics_seed" + std::to_string(out.seed) + ".csv");
    TrainConfig tc = cfg.train;
    tc.seed = out.seed;
    try {
      fit(tc, train, val, [&](const Metrics& tm, const Metrics& vm) {
        out.history.push_back(tm);
        out.history.push_back(vm);
      });
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
    try {
      write_text(out.metrics_file, metrics_csv(out.seed, out.history, family));
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
    if (log) {
      std::string line = "seed " + std::to_string(out.seed) + ": ";
      line += out.ok ? "done" : "FAILED (" + out.error + ")";
      if (out.ok && !out.history.empty()) line += ", final val mae " + fmt(out.history.back().mae);
#pragma omp critical(fkl_log)
      log(line);
    }
  }

  std::vector<fs::path> files;
  for (const SeedOutcome& s : result.seeds) {
    if (s.ok) files.push_back(s.metrics_file);
  }
  result.summary_file = cfg.output_dir / "summary.csv";
  std::ostringstream out;
  out << "epoch,n_seeds";
  static const char* kColumns[] = {"l_ld", "l_exp", "l_smooth", "total", "mae"};
  for (const char* split : {"train", "val"}) {
    for (const char* c : kColumns) out << ',' << split << '_' << c << "_mean," << split << '_' << c << "_std";
  }
  out << '\n';
  if (!files.empty()) {
    for (const SummaryRow& row : summarize(files)) {
      out << row.epoch << ',' << row.n_seeds;
      for (int s = 0; s < 2; ++s) {
        for (int c = 0; c < 5; ++c) {
          if (c == 2 && family == LossFamily::reference) {
            out << ",,";
          } else {
            out << ',' << fmt(row.mean[s][c]) << ',' << fmt(row.std[s][c]);
          }
        }
      }
      out << '\n';
    }
  }
  write_text(result.summary_file, out.str());
  return result;
}

std::vector<Metrics> read_metrics(const fs::path& path, LossFamily* family) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "seed,epoch,split,l_ld,l_exp,l_smooth,total,mae") {
    throw std::runtime_error("unexpected metrics header in " + path.string());
  }
  std::vector<Metrics> rows;
  bool has_smooth = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string field; std::getline(ls, field, ',');) f.push_back(field);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw std::runtime_error("malformed metrics row in " + path.string());
    Metrics m;
    m.epoch = std::stoul(f[1]);
    m.split = f[2] == "val" ? Split::val : Split::train;
    m.loss.l_ld = std::strtod(f[3].c_str(), nullptr);
    m.loss.l_exp = std::strtod(f[4].c_str(), nullptr);
    has_smooth = !f[5].empty();
    m.loss.l_smooth = has_smooth ? std::strtod(f[5].c_str(), nullptr) : 0.0;
    m.loss.total = std::strtod(f[6].c_str(), nullptr);
    m.mae = std::strtod(f[7].c_str(), nullptr);
    m.loss.family = has_smooth ? LossFamily::full_kl : LossFamily::reference;
    rows.push_back(m);
  }
  if (family) *family = has_smooth ? LossFamily::full_kl : LossFamily::reference;
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<fs::path>& metrics_files) {
  // values[epoch][split][column] -> one entry per seed
  std::map<std::size_t, std::vector<double>[2][5]> values;
  for (const fs::path& file : metrics_files) {
    for (const Metrics& m : read_metrics(file)) {
      auto& slot = values[m.epoch][m.split == Split::val ? 1 : 0];
      const double cols[5] = {m.loss.l_ld, m.loss.l_exp, m.loss.l_smooth, m.loss.total, m.mae};
      for (int c = 0; c < 5; ++c) slot[c].push_back(cols[c]);
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [epoch, slot] : values) {
    SummaryRow row;
    row.epoch = epoch;
    row.n_seeds = slot[0][0].size();
    for (int s = 0; s < 2; ++s) {
      for (int c = 0; c < 5; ++c) {
        row.mean[s][c] = mean_of(slot[s][c]);
        row.std[s][c] = stddev(slot[s][c], row.mean[s][c]);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

ComparisonReport compare_results(const RunConfig& a, const ExperimentResult& ra,
                                 const RunConfig& b, const ExperimentResult& rb) {
  ComparisonReport report;
  report.family_a = to_string(a.train.loss.family);
  report.family_b = to_string(b.train.loss.family);
  std::vector<double> maes_a, maes_b;
  for (std::size_t k = 0; k < a.seeds.size(); ++k) {
    const SeedOutcome& sa = ra.seeds.at(k);
    const SeedOutcome& sb = rb.seeds.at(k);
    if (!sa.ok || !sb.ok || sa.history.empty() || sb.history.empty()) {
      report.ok = false;
      continue;
    }
    ComparisonRow row;
    row.seed = sa.seed;
    row.mae_a = sa.history.back().mae;  // last row is the final-epoch val split
    row.mae_b = sb.history.back().mae;
    row.rel_diff = (row.mae_a - row.mae_b) / row.mae_b;
    report.rows.push_back(row);
    maes_a.push_back(row.mae_a);
    maes_b.push_back(row.mae_b);
  }
  report.mean_a = mean_of(maes_a);
  report.std_a = stddev(maes_a, report.mean_a);
  report.mean_b = mean_of(maes_b);
  report.std_b = stddev(maes_b, report.mean_b);
  report.rel_diff = report.rows.empty() ? 0.0 : (report.mean_a - report.mean_b) / report.mean_b;
  return report;
}

void write_comparison(const ComparisonReport& report, const RunConfig& a, const RunConfig& b,
                      const fs::path& report_dir) {
  std::error_code ec;
  fs::create_directories(report_dir, ec);
  if (ec || !fs::is_directory(report_dir)) {
    throw std::runtime_error("cannot create report directory " + report_dir.string());
  }
  std::ostringstream csv;
  csv << "seed,mae_a,mae_b,rel_diff\n";
  for (const ComparisonRow& r : report.rows) {
    csv << r.seed << ',' << fmt(r.mae_a) << ',' << fmt(r.mae_b) << ',' << fmt(r.rel_diff) << '\n';
  }
  write_text(report_dir / "compare.csv", csv.str());

  std::ostringstream txt;
  txt << "final-epoch validation MAE, paired by seed\n";
  txt << "a = " << report.family_a << ", b = " << report.family_b << "\n\n";
  char buf[160];
  for (const ComparisonRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "seed %-6llu a %10.5f  b %10.5f  (a-b)/b %+9.5f\n",
                  static_cast<unsigned long long>(r.seed), r.mae_a, r.mae_b, r.rel_diff);
    txt << buf;
  }
  std::snprintf(buf, sizeof buf, "\nmean a %.5f +- %.5f\nmean b %.5f +- %.5f\nrelative difference %+.5f\n",
                report.mean_a, report.std_a, report.mean_b, report.std_b, report.rel_diff);
  txt << buf;
  if (!report.ok) txt << "WARNING: some seeds failed and are excluded\n";
  txt << "\nconfig a:\n" << to_json(a) << "\nconfig b:\n" << to_json(b);
  write_text(report_dir / "compare.txt", txt.str());
}

ComparisonReport compare(const RunConfig& a, const RunConfig& b, const fs::path& report_dir,
                         const Logger& log) {
  if (!(a.dataset == b.dataset) || !(a.grid == b.grid) || a.val_fraction != b.val_fraction ||
      a.split_seed != b.split_seed || a.seeds != b.seeds) {
    throw ConfigError("compare: configs must share dataset, grid, split, and seeds");
  }
  if (log) log("running a (" + std::string(to_string(a.train.loss.family)) + ")");
  const ExperimentResult ra = run_experiment(a, log);
  if (log) log("running b (" + std::string(to_string(b.train.loss.family)) + ")");
  const ExperimentResult rb = run_experiment(b, log);
  ComparisonReport report = compare_results(a, ra, b, rb);
  write_comparison(report, a, b, report_dir);
  return report;
}

}  // namespace fkl::runner
