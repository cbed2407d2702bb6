#include "fkl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fkl/rng.hpp"

namespace fkl {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last || !std::isfinite(value)) {
    throw std::runtime_error("row " + std::to_string(row) + ": column '" + column +
                             "' is not a finite number: '" + text + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Sample make_sample(std::string id, std::vector<double> features, double mu, double sigma,
                   const LabelGrid& grid) {
  if (!std::isfinite(mu) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sample '" + id + "': non-finite mean or std");
  }
  if (sigma < min_sigma(grid)) {
    throw std::invalid_argument("sample '" + id + "': std " + format_double(sigma) +
                                " below floor " + format_double(min_sigma(grid)));
  }
  if (mu < grid.front() || mu > grid.back()) {
    throw std::invalid_argument("sample '" + id + "': mean " + format_double(mu) +
                                " outside grid span");
  }
  for (double f : features) {
    if (!std::isfinite(f)) throw std::invalid_argument("sample '" + id + "': non-finite feature");
  }
  Sample s;
  s.target_pmf = discretize_gaussian(mu, sigma, grid);
  s.id = std::move(id);
  s.features = std::move(features);
  s.target_mu = mu;
  s.target_sigma = sigma;
  return s;
}

Dataset gen_synthetic(const SyntheticSpec& spec, const LabelGrid& grid) {
  if (spec.n == 0 || spec.d_in == 0) {
    throw std::invalid_argument("gen_synthetic: n and d_in must be positive");
  }
  const double span = grid.back() - grid.front();
  if (!(spec.sigma_lo >= min_sigma(grid)) || !(spec.sigma_hi >= spec.sigma_lo) ||
      !(spec.sigma_hi <= span / 4.0)) {
    throw std::invalid_argument("gen_synthetic: sigma_range must satisfy 0.5*step <= lo <= hi <= span/4");
  }

  Rng rng(spec.seed);
  const std::size_t d = spec.d_in;
  std::vector<double> w(d), v(d), omega(d), phase(d);
  for (std::size_t k = 0; k < d; ++k) {
    w[k] = rng.uniform(-1.0, 1.0);
    v[k] = rng.uniform(-1.0, 1.0);
    omega[k] = rng.uniform(1.0, std::numbers::pi);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  // Rough standard deviation of the raw score for x ~ U[-1, 1]^d.
  double var = 0.0;
  for (std::size_t k = 0; k < d; ++k) var += w[k] * w[k] / 3.0 + v[k] * v[k] / 2.0;
  const double scale = 1.0 / std::sqrt(var);

  const double lo = grid.front() + 3.0 * spec.sigma_hi;
  const double hi = grid.back() - 3.0 * spec.sigma_hi;

  Dataset ds;
  ds.grid = grid;
  ds.samples.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::vector<double> x(d);
    for (double& xi : x) xi = rng.uniform(-1.0, 1.0);
    double score = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      score += w[k] * x[k] + v[k] * std::sin(omega[k] * x[(k + 1) % d] + phase[k]);
    }
    const double unit = 0.5 * (1.0 + std::tanh(score * scale));
    const double mu = lo + (hi - lo) * unit;
    const double sigma = rng.uniform(spec.sigma_lo, spec.sigma_hi);
    ds.samples.push_back(make_sample(std::to_string(i), std::move(x), mu, sigma, grid));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const LabelGrid& grid, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 3 || header.front() != "id" || header[header.size() - 2] != "mean" ||
      header.back() != "std") {
    throw std::runtime_error("load_csv: header must be id,f0,...,f{d-1},mean,std");
  }
  const std::size_t d = header.size() - 3;
  for (std::size_t k = 0; k < d; ++k) {
    if (header[k + 1] != "f" + std::to_string(k)) {
      throw std::runtime_error("load_csv: header column " + std::to_string(k + 1) + " must be f" +
                               std::to_string(k));
    }
  }

  Dataset ds;
  ds.grid = grid;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = parse_double(fields[k + 1], row, header[k + 1]);
    const double mu = parse_double(fields[d + 1], row, "mean");
    const double sigma = parse_double(fields[d + 2], row, "std");
    try {
      ds.samples.push_back(make_sample(fields[0], std::move(x), mu, sigma, grid));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("load_csv: row " + std::to_string(row) + ": " + e.what());
    }
    if (report && (mu - 3.0 * sigma < grid.front() || mu + 3.0 * sigma > grid.back())) {
      report->truncated_rows.push_back(row);
    }
  }
  if (ds.samples.empty()) throw std::runtime_error("load_csv: no data rows in " + path.string());
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  const std::size_t d = ds.feature_dim();
  out << "id";
  for (std::size_t k = 0; k < d; ++k) out << ",f" << k;
  out << ",mean,std\n";
  for (const Sample& s : ds.samples) {
    out << s.id;
    for (double f : s.features) out << ',' << format_double(f);
    out << ',' << format_double(s.target_mu) << ',' << format_double(s.target_sigma) << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  if (n_val == 0 || n_val == n) {
    throw std::invalid_argument("split: fraction leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  Dataset train, val;
  train.grid = ds.grid;
  val.grid = ds.grid;
  train.split = Split::train;
  val.split = Split::val;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_val ? val : train).samples.push_back(ds.samples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace fkl
