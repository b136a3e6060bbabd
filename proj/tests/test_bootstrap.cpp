#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "doseband/bootstrap.hpp"
#include "doseband/error.hpp"
#include "fixtures.hpp"

using namespace doseband;

namespace {

double brute_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  for (double c : v) {
    double below = 0;
    for (double w : v) below += w <= c;
    if (below / static_cast<double>(v.size()) >= q) return c;
  }
  return v.back();
}

const BootstrapEnsemble& small_ensemble() {
  static const BootstrapEnsemble e = [] {
    auto cfg = testing::tiny_config();
    cfg.epochs = 5;
    return fit_ensemble(testing::synthetic_data(), cfg, 6, 1234);
  }();
  return e;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("doseband_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("bootstrap") {

TEST_CASE("quantile examples") {
  const std::vector<double> odd{3, 1, 2};
  CHECK(quantile(odd, 0.5) == 2);
  for (double q : {0.0, 0.3, 1.0}) CHECK(quantile(std::vector<double>{5}, q) == 5);
  const std::vector<double> four{1, 2, 3, 4};
  CHECK(quantile(four, 0.5) == 2);
  CHECK(quantile(four, 0.5000001) == 3);
  CHECK(quantile(four, 0.0) == 1);
  CHECK(quantile(four, 1.0) == 4);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), InputError);
  CHECK_THROWS_AS(quantile(four, 1.5), InputError);
}

TEST_CASE("quantile matches the inf definition on random multisets") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> nd(1, 40), vd(0, 9);
  std::uniform_real_distribution<double> qd(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(static_cast<std::size_t>(nd(rng)));
    for (double& x : v) x = vd(rng);
    double q = qd(rng);
    if (rep % 3 == 0) q = static_cast<double>(vd(rng) % static_cast<int>(v.size() + 1)) / v.size();
    REQUIRE(quantile(v, q) == brute_quantile(v, q));
  }
}

TEST_CASE("resampling") {
  Dataset one;
  one.dim = 1;
  const std::vector<double> x{0.4};
  one.push_back(x, 0.2, 1.5);
  for (const auto& r : resample(one, 3, 9)) {
    CHECK(r.size() == 1);
    CHECK(r.y[0] == 1.5);
  }

  SyntheticConfig cfg;
  cfg.n = 1000;
  const Dataset d = generate(cfg);
  const auto reps = resample(d, 50, 5);
  double frac = 0.0;
  for (const auto& r : reps) {
    REQUIRE(r.size() == d.size());
    std::set<std::pair<double, double>> distinct;
    for (std::size_t i = 0; i < r.size(); ++i) distinct.insert({r.x[i], r.y[i]});
    frac += static_cast<double>(distinct.size()) / d.size();
  }
  CHECK(std::abs(frac / 50 - (1 - std::exp(-1.0))) <= 0.03);

  const auto again = resample(d, 50, 5);
  CHECK(again[17].y == reps[17].y);
  CHECK(resample_one(d, 5, 17).y == reps[17].y);
  CHECK(resample(d, 2, 6)[0].y != reps[0].y);
}

TEST_CASE("ensemble fitting is deterministic and job-count independent") {
  auto cfg = testing::tiny_config();
  cfg.epochs = 3;
  const auto& data = testing::synthetic_data();
  const auto a = fit_ensemble(data, cfg, 3, 77, 1);
  const auto b = fit_ensemble(data, cfg, 3, 77, 3);
  CHECK(a.digest() == b.digest());
  CHECK(a.models[0].digest() != a.models[1].digest());
  CHECK(a.seeds[0] != a.seeds[1]);
  CHECK(a.source_hash == dataset_digest(data));
  CHECK(fit_ensemble(data, cfg, 3, 78).digest() != a.digest());
  CHECK_THROWS_AS(fit_ensemble(data, cfg, 1, 77), InputError);
}

TEST_CASE("replicate divergence names the replicate") {
  auto cfg = testing::tiny_config();
  cfg.optimizer = Optimizer::kSgd;
  cfg.learning_rate = 1e300;
  try {
    fit_ensemble(testing::synthetic_data(), cfg, 2, 1);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(std::string(e.what()).find("replicate 0") != std::string::npos);
  }
}

TEST_CASE("ensemble save/load round trip and tamper detection") {
  const auto& e = small_ensemble();
  const auto dir = scratch("ensemble");
  e.save(dir.string());
  const auto back = BootstrapEnsemble::load(dir.string());
  CHECK(back.digest() == e.digest());
  CHECK(back.seeds == e.seeds);
  CHECK(back.source_hash == e.source_hash);

  {
    auto j = e.models[1].to_json();
    std::ofstream(dir / "model_001.json") << j.dump();
  }
  CHECK_NOTHROW(BootstrapEnsemble::load(dir.string()));
  {
    auto other = testing::synthetic_model();
    other.save((dir / "model_001.json").string());
  }
  CHECK_THROWS_AS(BootstrapEnsemble::load(dir.string()), InputError);
  CHECK_THROWS_AS(BootstrapEnsemble::load((dir / "missing").string()), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("CI nesting in alpha and in Lambda") {
  const auto& e = small_ensemble();
  BoundSpec spec;
  const std::vector<double> xs{0.3, 0.9, 1.5};
  const std::vector<double> lambdas{1.0, 1.1, 1.2, 1.6};
  const std::vector<double> alphas{0.01, 0.05, 0.2, 0.5, 0.999};
  for (double t : {0.1, 0.6}) {
    const auto grid = apo_ci_sweep(e, xs, t, lambdas, alphas, spec);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        CHECK(grid[l][a].lower <= grid[l][a].upper);
        if (a > 0) {
          CHECK(grid[l][a - 1].lower <= grid[l][a].lower);
          CHECK(grid[l][a - 1].upper >= grid[l][a].upper);
        }
        if (l > 0) {
          CHECK(grid[l - 1][a].lower >= grid[l][a].lower);
          CHECK(grid[l - 1][a].upper <= grid[l][a].upper);
        }
      }
    }
    const auto single = apo_ci(e, xs, t, Lambda(1.2), 0.05, spec);
    CHECK(single.lower == grid[2][1].lower);
    CHECK(single.upper == grid[2][1].upper);
  }
}

TEST_CASE("CI around a single covariate equals the CAPO CI") {
  const auto& e = small_ensemble();
  BoundSpec spec;
  const std::vector<double> x{1.0};
  const auto a = apo_ci(e, x, 0.5, Lambda(1.6), 0.05, spec);
  const auto c = capo_ci(e, x, 0.5, Lambda(1.6), 0.05, spec);
  CHECK(a.lower == c.lower);
  CHECK(a.upper == c.upper);
}

TEST_CASE("CI at Lambda = 1 is the bootstrap interval of mu~") {
  const auto& e = small_ensemble();
  BoundSpec spec;
  const std::vector<double> x{1.0};
  std::vector<double> mus;
  for (const auto& m : e.models) mus.push_back(conditional_mean(m.evaluate(x, 0.5)));
  const auto ci = capo_ci(e, x, 0.5, Lambda(1.0), 0.1, spec);
  CHECK(ci.lower == quantile(mus, 0.05));
  CHECK(ci.upper == quantile(mus, 0.95));
}

TEST_CASE("ensemble of identical models reproduces the single-model bound") {
  BootstrapEnsemble e;
  for (int k = 0; k < 4; ++k) {
    e.models.push_back(testing::synthetic_model());
    e.seeds.push_back(static_cast<std::uint64_t>(k));
  }
  BoundSpec spec;
  const std::vector<double> x{0.7};
  const auto ci = capo_ci(e, x, 0.4, Lambda(1.6), 0.05, spec);
  const auto b = capo_bounds(testing::synthetic_model(), x, 0.4, Lambda(1.6), spec);
  CHECK(ci.lower == b.lower);
  CHECK(ci.upper == b.upper);
}

TEST_CASE("CI argument checks") {
  BootstrapEnsemble one;
  one.models.push_back(testing::synthetic_model());
  one.seeds.push_back(0);
  BoundSpec spec;
  const std::vector<double> x{1.0};
  CHECK_THROWS_AS(capo_ci(one, x, 0.5, Lambda(1.6), 0.05, spec), InputError);
  CHECK_THROWS_AS(capo_ci(small_ensemble(), x, 0.5, Lambda(1.6), 0.0, spec), InputError);
  CHECK_THROWS_AS(capo_ci(small_ensemble(), x, 0.5, Lambda(1.6), 1.0, spec), InputError);
}

}  // TEST_SUITE
