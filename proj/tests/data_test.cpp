#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "fkl/data.hpp"

namespace fkl {
namespace {

namespace fs = std::filesystem;

LabelGrid age_grid() { return make_grid(0.0, 100.0, 1.0); }

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("fkl_data_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& content = {}) const {
    const fs::path p = path_ / name;
    if (!content.empty()) std::ofstream(p) << content;
    return p;
  }

 private:
  fs::path path_;
};

void expect_same_samples(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_EQ(a.samples[i].features, b.samples[i].features);
    EXPECT_EQ(a.samples[i].target_mu, b.samples[i].target_mu);
    EXPECT_EQ(a.samples[i].target_sigma, b.samples[i].target_sigma);
    EXPECT_EQ(a.samples[i].target_pmf, b.samples[i].target_pmf);
  }
}

TEST(GenSynthetic, DeterministicGivenSeed) {
  const Dataset a = gen_synthetic({200, 5, 2.0, 6.0, 7}, age_grid());
  const Dataset b = gen_synthetic({200, 5, 2.0, 6.0, 7}, age_grid());
  expect_same_samples(a, b);
  const Dataset c = gen_synthetic({200, 5, 2.0, 6.0, 8}, age_grid());
  EXPECT_NE(a.samples[0].features, c.samples[0].features);
}

TEST(GenSynthetic, ConstructionBounds) {
  const Dataset ds = gen_synthetic({1000, 16, 2.0, 6.0, 1}, age_grid());
  ASSERT_EQ(ds.size(), 1000u);
  EXPECT_EQ(ds.feature_dim(), 16u);
  double lo = 100.0, hi = 0.0;
  for (const Sample& s : ds.samples) {
    EXPECT_GE(s.target_mu, 18.0);
    EXPECT_LE(s.target_mu, 82.0);
    EXPECT_GE(s.target_sigma, 2.0);
    EXPECT_LE(s.target_sigma, 6.0);
    for (double f : s.features) {
      EXPECT_GE(f, -1.0);
      EXPECT_LE(f, 1.0);
    }
    double sum = 0.0;
    for (double p : s.target_pmf.probs()) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    lo = std::min(lo, s.target_mu);
    hi = std::max(hi, s.target_mu);
  }
  // The map actually uses the range rather than collapsing to the middle.
  EXPECT_LT(lo, 35.0);
  EXPECT_GT(hi, 65.0);
}

TEST(GenSynthetic, MomentsRecovered) {
  const LabelGrid grid = age_grid();
  const Dataset ds = gen_synthetic({500, 4, 2.0, 6.0, 3}, grid);
  for (const Sample& s : ds.samples) {
    const Moments m = moments(s.target_pmf, grid);
    EXPECT_NEAR(m.mu, s.target_mu, 0.02 * s.target_mu);
    const double var = s.target_sigma * s.target_sigma;
    EXPECT_NEAR(m.var, var, 0.02 * var);
  }
}

TEST(GenSynthetic, MeanDependsOnFeatures) {
  // Sigma is drawn independently of the features; the mean is a function of them.
  const Dataset ds = gen_synthetic({400, 3, 2.0, 6.0, 5}, age_grid());
  double mx = 0.0, my = 0.0;
  for (const Sample& s : ds.samples) {
    mx += s.features[0];
    my += s.target_mu;
  }
  mx /= 400.0;
  my /= 400.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const Sample& s : ds.samples) {
    sxy += (s.features[0] - mx) * (s.target_mu - my);
    sxx += (s.features[0] - mx) * (s.features[0] - mx);
    syy += (s.target_mu - my) * (s.target_mu - my);
  }
  EXPECT_GT(std::abs(sxy / std::sqrt(sxx * syy)), 0.1);
}

TEST(GenSynthetic, InvalidSigmaRange) {
  EXPECT_THROW(gen_synthetic({10, 2, 0.4, 6.0, 1}, age_grid()), std::invalid_argument);
  EXPECT_THROW(gen_synthetic({10, 2, 6.0, 2.0, 1}, age_grid()), std::invalid_argument);
  EXPECT_THROW(gen_synthetic({10, 2, 2.0, 26.0, 1}, age_grid()), std::invalid_argument);
  EXPECT_THROW(gen_synthetic({0, 2, 2.0, 6.0, 1}, age_grid()), std::invalid_argument);
}

TEST(LoadCsv, ThreeRows) {
  TempDir dir;
  const fs::path p = dir.file("three.csv",
                              "id,f0,f1,mean,std\n"
                              "a,0.5,1.0,30,3\n"
                              "b,-0.25,0,45.5,2.5\n"
                              "c,1e-3,2,60,4\n");
  const Dataset ds = load_csv(p, age_grid());
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.feature_dim(), 2u);
  EXPECT_EQ(ds.samples[1].id, "b");
  EXPECT_EQ(ds.samples[1].target_mu, 45.5);
  EXPECT_EQ(ds.samples[2].features, (std::vector<double>{1e-3, 2.0}));
}

TEST(LoadCsv, ZeroStdNamesRow) {
  TempDir dir;
  const fs::path p = dir.file("bad.csv",
                              "id,f0,mean,std\n"
                              "a,0.5,30,3\n"
                              "b,0.1,40,0\n");
  try {
    load_csv(p, age_grid());
    FAIL() << "expected error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MalformedInputs) {
  TempDir dir;
  const LabelGrid grid = age_grid();
  EXPECT_THROW(load_csv(dir.file("missing.csv"), grid), std::runtime_error);
  EXPECT_THROW(load_csv(dir.file("h.csv", "id,x0,mean,std\na,1,30,3\n"), grid), std::runtime_error);
  EXPECT_THROW(load_csv(dir.file("n.csv", "id,f0,mean,std\na,1,30\n"), grid), std::runtime_error);
  EXPECT_THROW(load_csv(dir.file("t.csv", "id,f0,mean,std\na,abc,30,3\n"), grid), std::runtime_error);
  EXPECT_THROW(load_csv(dir.file("o.csv", "id,f0,mean,std\na,1,130,3\n"), grid), std::runtime_error);
  EXPECT_THROW(load_csv(dir.file("e.csv", "id,f0,mean,std\n"), grid), std::runtime_error);
}

TEST(LoadCsv, TruncatedRowsReported) {
  TempDir dir;
  const fs::path p = dir.file("edge.csv",
                              "id,f0,mean,std\n"
                              "a,0,50,3\n"
                              "b,0,2,3\n"
                              "c,0,97,2\n");
  LoadReport report;
  const Dataset ds = load_csv(p, age_grid(), &report);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(report.truncated_rows, (std::vector<std::size_t>{2, 3}));
}

TEST(Csv, RoundTrip) {
  TempDir dir;
  const LabelGrid grid = age_grid();
  const Dataset ds = gen_synthetic({60, 3, 2.0, 6.0, 11}, grid);
  const fs::path p = dir.file("rt.csv");
  write_csv(ds, p);
  const Dataset back = load_csv(p, grid);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].id, ds.samples[i].id);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(back.samples[i].features[k], ds.samples[i].features[k], 1e-9);
    }
    EXPECT_NEAR(back.samples[i].target_mu, ds.samples[i].target_mu, 1e-9);
    EXPECT_NEAR(back.samples[i].target_sigma, ds.samples[i].target_sigma, 1e-9);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      EXPECT_NEAR(back.samples[i].target_pmf[k], ds.samples[i].target_pmf[k], 1e-9);
    }
  }
}

TEST(Split, EightyTwenty) {
  const Dataset ds = gen_synthetic({100, 2, 2.0, 6.0, 1}, age_grid());
  const auto [train, val] = split(ds, 0.2, 3);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(val.size(), 20u);
  EXPECT_EQ(train.split, Split::train);
  EXPECT_EQ(val.split, Split::val);
}

TEST(Split, DeterministicGivenSeed) {
  const Dataset ds = gen_synthetic({100, 2, 2.0, 6.0, 1}, age_grid());
  const auto a = split(ds, 0.2, 3);
  const auto b = split(ds, 0.2, 3);
  expect_same_samples(a.first, b.first);
  expect_same_samples(a.second, b.second);
  const auto c = split(ds, 0.2, 4);
  std::vector<std::string> va, vc;
  for (const Sample& s : a.second.samples) va.push_back(s.id);
  for (const Sample& s : c.second.samples) vc.push_back(s.id);
  EXPECT_NE(va, vc);
}

TEST(Split, DisjointAndExhaustive) {
  const Dataset ds = gen_synthetic({137, 2, 2.0, 6.0, 1}, age_grid());
  const auto [train, val] = split(ds, 0.3, 9);
  std::vector<std::string> all, parts;
  for (const Sample& s : ds.samples) all.push_back(s.id);
  for (const Sample& s : train.samples) parts.push_back(s.id);
  for (const Sample& s : val.samples) parts.push_back(s.id);
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  EXPECT_EQ(all, parts);
}

TEST(Split, Errors) {
  const Dataset ds = gen_synthetic({10, 2, 2.0, 6.0, 1}, age_grid());
  EXPECT_THROW(split(ds, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(split(ds, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(split(ds, 0.01, 0), std::invalid_argument);
}

}  // namespace
}  // namespace fkl
