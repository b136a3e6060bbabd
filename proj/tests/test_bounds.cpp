#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "doseband/bounds.hpp"
#include "doseband/error.hpp"
#include "fixtures.hpp"

using namespace doseband;

namespace {

MixtureDensity random_mixture(std::mt19937_64& rng, int max_k = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MixtureDensity mix;
  const int k = 1 + static_cast<int>(u(rng) * max_k);
  double total = 0.0;
  for (int j = 0; j < k; ++j) {
    mix.weights.push_back(0.1 + u(rng));
    total += mix.weights.back();
    mix.means.push_back(6 * u(rng) - 3);
    mix.variances.push_back(0.05 + u(rng));
  }
  for (double& w : mix.weights) w /= total;
  return mix;
}

struct Brute {
  double lower, upper;
};

// Exhaustive search over every binary weighting of a discrete support.
Brute brute_force(const std::vector<double>& y, const std::vector<double>& p, double mu_tilde,
                  double gamma) {
  Brute b{INFINITY, -INFINITY};
  const std::size_t k = y.size();
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    double mass = 0.0, centred = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) {
        mass += p[i];
        centred += p[i] * (y[i] - mu_tilde);
      }
    }
    const double v = mu_tilde + centred / (gamma + mass);
    b.lower = std::min(b.lower, v);
    b.upper = std::max(b.upper, v);
  }
  return b;
}

BoundSpec exact_spec() {
  BoundSpec s;
  s.estimator = Estimator::kExact;
  return s;
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("Lambda") {
  CHECK(Lambda(1.0).is_unit());
  CHECK(Lambda(1.0 + 1e-10).is_unit());
  CHECK_FALSE(Lambda(1.0 + 1e-6).is_unit());
  CHECK(std::isinf(Lambda(1.0).gamma()));
  CHECK(Lambda(std::sqrt(2.0)).gamma() == doctest::Approx(1.0));
  CHECK_THROWS_AS(Lambda(0.5), InputError);
  CHECK_THROWS_AS(Lambda(std::nan("")), InputError);
}

TEST_CASE("step and sigmoid weightings") {
  CHECK(StepWeight{0.0, Direction::kNonDecreasing}(0.0) == 1.0);
  CHECK(StepWeight{0.0, Direction::kNonIncreasing}(0.0) == 1.0);
  CHECK(StepWeight{0.0, Direction::kNonDecreasing}(-1e-300) == 0.0);
  CHECK(StepWeight{0.0, Direction::kNonIncreasing}(1e-300) == 0.0);
  SigmoidWeight s{0.0, -50.0, 1e-3, Direction::kNonDecreasing};
  CHECK(s.scale() > 0.0);
  CHECK(s(1.0) == doctest::Approx(1.0));
  CHECK(s(-1.0) == doctest::Approx(0.0));
}

TEST_CASE("mu_w: empty and full weightings") {
  std::mt19937_64 rng(1);
  const auto mix = random_mixture(rng);
  const auto problem = CapoProblem::from_mixture(mix, BoundSpec{}, 3);
  for (double l : {1.1, 2.0, 50.0}) {
    CHECK(mu_w(StepWeight{INFINITY, Direction::kNonDecreasing}, problem, Lambda(l)) ==
          problem.mu_tilde());
  }
  // Full weighting in the Lambda -> infinity limit recovers the mean of the nodes.
  const auto full =
      mu_w(std::function<double(double)>([](double) { return 1.0; }), problem, Lambda(INFINITY));
  CHECK(full == doctest::Approx(problem.support().mean()).epsilon(1e-12));
  CHECK_THROWS_AS(mu_w(StepWeight{}, problem, Lambda(1.0)), InputError);
}

TEST_CASE("mu_w closed form for a half-normal weighting") {
  const auto problem = CapoProblem::from_mixture(MixtureDensity::gaussian(0.0, 1.0), 0.0,
                                                 exact_spec(), 0);
  const double expected = (1 / std::sqrt(2 * std::numbers::pi)) / 1.5;
  CHECK(std::abs(mu_w(StepWeight{0.0, Direction::kNonDecreasing}, problem,
                      Lambda(std::sqrt(2.0))) -
                 expected) <= 1e-9);
  CHECK(expected == doctest::Approx(0.26596).epsilon(1e-5));
}

TEST_CASE("exact step moments agree with GH nodes on smooth cases") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto mix = random_mixture(rng);
    BoundSpec gh;
    gh.estimator = Estimator::kGaussHermite;
    gh.gh_order = 128;
    const auto pg = CapoProblem::from_mixture(mix, gh, 1);
    const auto pe = CapoProblem::from_mixture(mix, exact_spec(), 1);
    const StepWeight w{mix.means[0] + 40.0, Direction::kNonIncreasing};  // covers everything
    const auto a = pg.moments(w), b = pe.moments(w);
    CHECK(a.mass == doctest::Approx(b.mass).epsilon(1e-12));
    CHECK(std::abs(a.centered - b.centered) <= 1e-10);
  }
}

TEST_CASE("grid search equals the 2^k brute force on discrete supports") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 12);
    std::vector<double> y(k), p(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      y[i] = 4 * u(rng) - 2;
      p[i] = 0.05 + u(rng);
      total += p[i];
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] /= total;
      mean += p[i] * y[i];
    }
    const double mu_tilde = rep % 2 == 0 ? mean : mean + 0.3 * (u(rng) - 0.5);
    const auto problem = CapoProblem::from_support(y, p, mu_tilde);
    for (double l : {1.05, 1.5, 3.0}) {
      const auto grid = capo_bounds_grid(problem, Lambda(l));
      const auto brute = brute_force(y, p, mu_tilde, Lambda(l).gamma());
      INFO("rep " << rep << " k " << k << " Lambda " << l);
      REQUIRE(std::abs(grid.lower - brute.lower) <= 1e-10);
      REQUIRE(std::abs(grid.upper - brute.upper) <= 1e-10);
      const auto line = capo_bounds_line(problem, Lambda(l));
      REQUIRE(std::abs(line.lower - brute.lower) <= 1e-10);
      REQUIRE(std::abs(line.upper - brute.upper) <= 1e-10);
    }
  }
}

TEST_CASE("line search equals grid search on sampled mixtures") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const auto problem = CapoProblem::from_mixture(random_mixture(rng), BoundSpec{}, rep);
    for (double l : {1.1, 1.6, 4.0}) {
      const auto g = capo_bounds_grid(problem, Lambda(l));
      const auto s = capo_bounds_line(problem, Lambda(l));
      CHECK(g.lower == s.lower);
      CHECK(g.upper == s.upper);
      CHECK(g.argmin_threshold == s.argmin_threshold);
      CHECK(g.argmax_threshold == s.argmax_threshold);
    }
  }
}

TEST_CASE("single threshold: line equals grid") {
  const std::vector<double> y{0.7}, p{1.0};
  const auto problem = CapoProblem::from_support(y, p, 0.2);
  const auto g = capo_bounds_grid(problem, Lambda(1.5));
  const auto s = capo_bounds_line(problem, Lambda(1.5));
  CHECK(g.lower == s.lower);
  CHECK(g.upper == s.upper);
}

TEST_CASE("Lambda = 1 collapses every optimizer without integrating") {
  std::mt19937_64 rng(5);
  const auto problem = CapoProblem::from_mixture(random_mixture(rng), BoundSpec{}, 1);
  for (auto b : {capo_bounds_grid(problem, Lambda(1.0)), capo_bounds_line(problem, Lambda(1.0)),
                 capo_bounds_gradient(problem, Lambda(1.0))}) {
    CHECK(b.lower == problem.mu_tilde());
    CHECK(b.upper == problem.mu_tilde());
    CHECK(b.width() == 0.0);
  }
}

TEST_CASE("sandwich and nesting across Lambda for every optimizer") {
  std::mt19937_64 rng(6);
  const std::vector<double> lambdas{1.0, 1.1, 1.2, 1.6, 3.0};
  for (int rep = 0; rep < 15; ++rep) {
    const auto problem = CapoProblem::from_mixture(random_mixture(rng), BoundSpec{}, rep);
    for (auto opt : {BoundOptimizer::kGrid, BoundOptimizer::kLine, BoundOptimizer::kGradient}) {
      BoundSpec spec;
      spec.optimizer = opt;
      SensitivityBound prev = capo_bounds(problem, Lambda(1.0), spec);
      for (double l : lambdas) {
        const auto b = capo_bounds(problem, Lambda(l), spec);
        CHECK(b.lower <= b.mu_tilde + 1e-9);
        CHECK(b.mu_tilde <= b.upper + 1e-9);
        if (opt != BoundOptimizer::kGradient) {
          CHECK(b.lower <= prev.lower);
          CHECK(b.upper >= prev.upper);
        }
        prev = b;
      }
    }
  }
}

TEST_CASE("gradient search tracks grid search") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto problem = CapoProblem::from_mixture(random_mixture(rng), BoundSpec{}, rep);
    const auto g = capo_bounds_grid(problem, Lambda(1.5));
    const auto d = capo_bounds_gradient(problem, Lambda(1.5));
    INFO("rep " << rep << " grid [" << g.lower << ", " << g.upper << "] gradient [" << d.lower
                << ", " << d.upper << "]");
    CHECK(std::abs(d.lower - g.lower) <= 0.02 * g.width());
    CHECK(std::abs(d.upper - g.upper) <= 0.02 * g.width());
    // A relaxed weighting is still monotone, so it cannot beat the step optimum.
    CHECK(d.lower >= g.lower - 1e-9);
    CHECK(d.upper <= g.upper + 1e-9);
  }
}

TEST_CASE("gradient search near Lambda = 1 has almost no width") {
  std::mt19937_64 rng(8);
  const auto problem = CapoProblem::from_mixture(random_mixture(rng), BoundSpec{}, 2);
  const auto pts = problem.support().points();
  const double range = pts.back() - pts.front();
  CHECK(capo_bounds_gradient(problem, Lambda(1.0001)).width() <= 1e-3 * range);
}

TEST_CASE("gradient search on a symmetric mixture is symmetric") {
  BoundSpec spec;
  spec.estimator = Estimator::kGaussHermite;
  const MixtureDensity mix{{0.5, 0.5}, {-1.0, 1.0}, {0.3, 0.3}};
  const auto problem = CapoProblem::from_mixture(mix, spec, 1);
  const auto b = capo_bounds_gradient(problem, Lambda(1.5));
  CHECK(b.upper > 0.0);
  CHECK(std::abs(b.lower + b.upper) <= 0.02 * b.upper);
}

TEST_CASE("translation equivariance") {
  std::mt19937_64 rng(9);
  for (auto est : {Estimator::kMonteCarlo, Estimator::kGaussHermite, Estimator::kExact}) {
    BoundSpec spec;
    spec.estimator = est;
    const auto problem = CapoProblem::from_mixture(random_mixture(rng), spec, 4);
    const double c = 2.5;
    const auto moved = problem.shifted(c);
    for (double l : {1.2, 1.6}) {
      const auto a = capo_bounds_grid(problem, Lambda(l));
      const auto b = capo_bounds_grid(moved, Lambda(l));
      CHECK(b.lower - a.lower == doctest::Approx(c).epsilon(1e-12));
      CHECK(b.upper - a.upper == doctest::Approx(c).epsilon(1e-12));
    }
  }
}

TEST_CASE("even threshold grid") {
  std::mt19937_64 rng(10);
  BoundSpec spec;
  spec.grid = ThresholdGrid::kEven;
  spec.even_points = 64;
  const auto problem = CapoProblem::from_mixture(random_mixture(rng), spec, 1);
  CHECK(problem.thresholds().size() == 64);
  const auto b = capo_bounds_grid(problem, Lambda(1.6));
  CHECK(b.lower < b.mu_tilde);
  CHECK(b.upper > b.mu_tilde);
  spec.even_points = 1;
  CHECK_THROWS_AS(CapoProblem::from_mixture(random_mixture(rng), spec, 1), InputError);
}

TEST_CASE("model-level CAPO and APO bounds") {
  const auto& model = testing::synthetic_model();
  BoundSpec spec;
  const std::vector<double> x{1.0};
  const auto capo = capo_bounds(model, x, 0.5, Lambda(1.6), spec);
  const auto apo = apo_bounds(model, x, 0.5, Lambda(1.6), spec);
  CHECK(apo.lower == capo.lower);
  CHECK(apo.upper == capo.upper);

  const std::vector<double> xs{0.3, 1.1, 1.9};
  const std::vector<double> dup{0.3, 1.1, 1.9, 0.3, 1.1, 1.9};
  const auto a = apo_bounds(model, xs, 0.5, Lambda(1.6), spec);
  const auto b = apo_bounds(model, dup, 0.5, Lambda(1.6), spec);
  CHECK(b.lower == doctest::Approx(a.lower).epsilon(1e-13));
  CHECK(b.upper == doctest::Approx(a.upper).epsilon(1e-13));

  const std::vector<double> empty;
  CHECK_THROWS_AS(apo_bounds(model, empty, 0.5, Lambda(1.6), spec), InputError);
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(capo_bounds(model, two, 0.5, Lambda(1.6), spec), InputError);
}

TEST_CASE("sweep equals individual evaluations on the same node set") {
  const auto& model = testing::synthetic_model();
  BoundSpec spec;
  spec.seed = 42;
  const std::vector<double> x{0.8};
  const std::vector<double> lambdas{1.0, 1.1, 1.2, 1.6};
  const auto sweep = capo_bounds_sweep(model, x, 0.3, lambdas, spec);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto single = capo_bounds(model, x, 0.3, Lambda(lambdas[i]), spec);
    CHECK(single.lower == sweep[i].lower);
    CHECK(single.upper == sweep[i].upper);
  }
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    CHECK(sweep[i].lower < sweep[i - 1].lower);
    CHECK(sweep[i].upper > sweep[i - 1].upper);
  }
}

TEST_CASE("rho") {
  const auto& model = testing::synthetic_model();
  BoundSpec spec;
  const std::vector<double> x{1.0};
  CHECK(rho(model, x, 0.5, Lambda(1.0), spec) == 0.0);
  CHECK(rho(model, x, 0.5, Lambda(kLambdaInfinityProxy), spec) == doctest::Approx(1.0).epsilon(1e-6));
  const double r12 = rho(model, x, 0.5, Lambda(1.2), spec);
  const double r16 = rho(model, x, 0.5, Lambda(1.6), spec);
  CHECK(r12 < r16);
  CHECK(r16 < 1.0);
  const std::vector<double> one{3.0}, p{1.0};
  CHECK_THROWS_AS(rho(CapoProblem::from_support(one, p, 3.0), Lambda(1.5), spec), DegenerateError);
}

TEST_CASE("KL diagnostic") {
  const auto n0 = MixtureDensity::gaussian(0.0, 1.0);
  const auto same = kl_diagnostic(n0, n0, Lambda(1.0));
  CHECK(std::abs(same.kl) <= 1e-12);
  CHECK(same.satisfied);
  const auto near = kl_diagnostic(n0, MixtureDensity::gaussian(0.1, 1.0), Lambda(std::exp(0.0051)));
  CHECK(near.kl == doctest::Approx(0.005).epsilon(1e-8));
  CHECK(near.satisfied);
  CHECK_FALSE(kl_diagnostic(n0, MixtureDensity::gaussian(0.1, 1.0), Lambda(std::exp(0.0049))).satisfied);
  const auto far = kl_diagnostic(n0, MixtureDensity::gaussian(3.0, 1.0), Lambda(1.1));
  CHECK(far.kl == doctest::Approx(4.5).epsilon(1e-8));
  CHECK_FALSE(far.satisfied);
}

TEST_CASE("KL diagnostic flags a vanishing reference density") {
  const auto wide = MixtureDensity::gaussian(0.0, 1.0);
  const auto narrow = MixtureDensity::gaussian(40.0, 1e-4);
  CHECK_THROWS_AS(kl_diagnostic(wide, narrow, Lambda(2.0)), SupportError);
}

TEST_CASE("option names round trip") {
  for (auto o : {BoundOptimizer::kGrid, BoundOptimizer::kLine, BoundOptimizer::kGradient}) {
    CHECK(bound_optimizer_from_string(to_string(o)) == o);
  }
  for (auto e : {Estimator::kMonteCarlo, Estimator::kGaussHermite, Estimator::kExact}) {
    CHECK(estimator_from_string(to_string(e)) == e);
  }
  CHECK_THROWS_AS(bound_optimizer_from_string("newton"), InputError);
}

}  // TEST_SUITE
