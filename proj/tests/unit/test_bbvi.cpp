#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "gsmvi/bbvi.hpp"
#include "gsmvi/dsl.hpp"
#include "gsmvi/targets.hpp"
#include "oracles.hpp"

using gsmvi::BbviParams;
using gsmvi::GaussianParams;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GaussianParams scalar(double mu, double var) {
  return GaussianParams(VectorXd::Constant(1, mu), MatrixXd::Constant(1, 1, var));
}

BbviParams random_params(int d, std::mt19937_64& gen) {
  BbviParams w;
  w.mean = oracle::random_normal(d, gen);
  w.chol_unconstrained = MatrixXd::Zero(d, d);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) w.chol_unconstrained(i, j) = n(gen);
  return w;
}

std::shared_ptr<const gsmvi::TargetModel> random_target(int d, int kind, std::uint64_t seed) {
  const gsmvi::GaussianTargetSpec base{d, d == 1 ? 1.0 : 10.0, seed, gsmvi::MeanMode::standard_normal_draw};
  switch (kind % 3) {
    case 0:
      return gsmvi::make_gaussian_target(base);
    case 1:
      return gsmvi::make_sinh_arcsinh_target({base, 0.4, 1.3});
    default:
      return gsmvi::make_dsl_target(gsmvi::dsl::parse("-0.5*dot(theta,theta) - 0.1*sum(theta[i]^4) + tanh(theta[0])", d), d);
  }
}

gsmvi::BbviConfig adam_config(double lr) {
  return {.iterations = 1, .batch_size = 1, .learning_rate = lr, .init = GaussianParams::standard(1)};
}

}  // namespace

TEST_CASE("parameter encoding") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 6;
    const GaussianParams q(oracle::random_normal(d, gen), oracle::random_spd(d, gen));
    const BbviParams w = BbviParams::encode(q);
    const BbviParams back = BbviParams::encode(w.decode());
    CHECK((back.mean - w.mean).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.chol_unconstrained - w.chol_unconstrained).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((w.decode().covariance() - q.covariance()).cwiseAbs().maxCoeff() <= 1e-12 * q.covariance().norm());
    const BbviParams flat = BbviParams::from_flat(w.to_flat(), d);
    CHECK(flat.to_flat() == w.to_flat());
  }
  BbviParams w;
  w.mean = VectorXd::LinSpaced(2, 10.0, 11.0);
  w.chol_unconstrained = MatrixXd::Zero(2, 2);
  w.chol_unconstrained << 1.0, 0.0, 2.0, 3.0;
  const VectorXd flat = w.to_flat();
  REQUIRE(flat.size() == 5);
  CHECK(flat[2] == 1.0);
  CHECK(flat[3] == 2.0);
  CHECK(flat[4] == 3.0);
  CHECK(w.chol()(1, 1) == doctest::Approx(std::exp(3.0)));
  CHECK_THROWS_AS(BbviParams::from_flat(VectorXd::Zero(4), 2), gsmvi::DimensionMismatch);
}

TEST_CASE("ELBO estimate examples") {
  std::mt19937_64 gen(2);
  const BbviParams w = random_params(3, gen);
  const gsmvi::GaussianTarget self(w.decode(), "self");
  gsmvi::Rng rng(4);
  for (int j = 0; j < 20; ++j) {
    const VectorXd theta = gsmvi::gaussian_sample(w.decode(), rng);
    CHECK(gsmvi::elbo_estimate(w, self, {theta}) == 0.0);
  }

  const gsmvi::GaussianTarget shifted(scalar(1.0, 1.0), "shifted");
  CHECK(gsmvi::elbo_estimate(BbviParams::encode(scalar(0, 1)), shifted, {VectorXd::Zero(1)}) ==
        doctest::Approx(-0.5).epsilon(1e-14));

  const auto unnormalized = gsmvi::make_dsl_target(gsmvi::dsl::parse("-(theta[0]^2)/2", 1), 1);
  std::vector<VectorXd> samples;
  for (double x : {-3.0, -0.2, 0.0, 1.5}) samples.push_back(VectorXd::Constant(1, x));
  CHECK(gsmvi::elbo_estimate(BbviParams::encode(scalar(0, 1)), *unnormalized, samples) ==
        doctest::Approx(0.5 * std::log(2.0 * M_PI)).epsilon(1e-13));

  CHECK_THROWS_AS(gsmvi::elbo_estimate(w, self, {}), gsmvi::InvalidArgument);
}

TEST_CASE("ELBO of normalized targets stays below zero within Monte Carlo error") {
  std::mt19937_64 gen(3);
  gsmvi::Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 4;
    const auto target = random_target(d, trial % 2, static_cast<std::uint64_t>(trial));
    const BbviParams w = random_params(d, gen);
    const int n = 2000;
    VectorXd terms(n);
    for (int j = 0; j < n; ++j) terms[j] = gsmvi::elbo_estimate(w, *target, {gsmvi::gaussian_sample(w.decode(), rng)});
    const double mean = terms.mean();
    const double se = std::sqrt((terms.array() - mean).square().sum() / (n - 1) / n);
    CHECK(mean <= 3.0 * se);
  }
}

TEST_CASE("reparameterized gradient matches finite differences") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 5;
    const auto target = random_target(d, trial, static_cast<std::uint64_t>(trial));
    const BbviParams w = random_params(d, gen);
    gsmvi::Rng rng(static_cast<std::uint64_t>(trial));
    const MatrixXd normals = rng.normal_matrix(d, 1 + trial % 4);
    for (auto entropy : {gsmvi::EntropyEstimator::analytic, gsmvi::EntropyEstimator::per_sample}) {
      const VectorXd grad = gsmvi::reparam_gradient(w, *target, normals, entropy);
      const VectorXd fd = oracle::fd_gradient(
          [&](const VectorXd& flat) {
            return gsmvi::reparam_objective(BbviParams::from_flat(flat, d), *target, normals, entropy);
          },
          w.to_flat());
      CHECK(oracle::rel_error(grad, fd) <= 1e-5);
    }
    // The two entropy estimators differ in value but not in gradient.
    CHECK(oracle::rel_error(gsmvi::reparam_gradient(w, *target, normals, gsmvi::EntropyEstimator::per_sample),
                            gsmvi::reparam_gradient(w, *target, normals, gsmvi::EntropyEstimator::analytic)) <= 1e-10);
    gsmvi::Rng same(static_cast<std::uint64_t>(trial));
    CHECK(gsmvi::elbo_gradient(w, *target, static_cast<int>(normals.cols()), same) ==
          gsmvi::reparam_gradient(w, *target, normals));
  }
}

TEST_CASE("Monte Carlo gradient expectations") {
  SUBCASE("stationary at the target") {
    const BbviParams w = BbviParams::encode(scalar(0.7, 2.0));
    const gsmvi::GaussianTarget self(w.decode(), "self");
    gsmvi::Rng rng(8);
    CHECK(gsmvi::elbo_gradient(w, self, 10000, rng).cwiseAbs().maxCoeff() <= 0.05);
  }
  SUBCASE("mean gradient for a shifted unit-variance target") {
    const double m = 1.5, mu = -0.5;
    const gsmvi::GaussianTarget target(scalar(m, 1.0), "shifted");
    const BbviParams w = BbviParams::encode(scalar(mu, 1.0));
    gsmvi::Rng rng(9);
    const int b = 10000;
    const double g_mu = gsmvi::elbo_gradient(w, target, b, rng)[0];
    // per-sample mean gradient is m - mu - z, unit variance
    CHECK(std::abs(g_mu - (m - mu)) <= 3.0 / std::sqrt(static_cast<double>(b)));
  }
}

TEST_CASE("non-finite model gradients are reported") {
  const auto target = gsmvi::make_dsl_target(gsmvi::dsl::parse("sqrt(theta[0])", 1), 1);
  const MatrixXd zero = MatrixXd::Zero(1, 1);
  CHECK_THROWS(gsmvi::reparam_gradient(BbviParams::encode(GaussianParams::standard(1)), *target, zero));
}

TEST_CASE("ADAM") {
  const VectorXd p = VectorXd::LinSpaced(3, -1.0, 1.0);
  SUBCASE("zero gradient") {
    const auto [next, state] = gsmvi::adam_step(p, VectorXd::Zero(3), gsmvi::AdamState::zeros(3), adam_config(0.1));
    CHECK(next == p);
    CHECK(state.step_count == 1);
  }
  SUBCASE("first step is lr * sign(g)") {
    VectorXd g(3);
    g << 3.0, -0.01, 1e3;
    const auto [next, state] = gsmvi::adam_step(p, g, gsmvi::AdamState::zeros(3), adam_config(0.01));
    for (int i = 0; i < 3; ++i) CHECK(next[i] - p[i] == doctest::Approx(0.01 * (g[i] > 0 ? 1 : -1)).epsilon(1e-5));
    CHECK((state.second_moment.array() >= 0.0).all());
  }
  SUBCASE("two steps with constant gradient") {
    const VectorXd g = VectorXd::Ones(3);
    auto [p1, s1] = gsmvi::adam_step(p, g, gsmvi::AdamState::zeros(3), adam_config(0.1));
    auto [p2, s2] = gsmvi::adam_step(p1, g, s1, adam_config(0.1));
    CHECK((p2 - p).cwiseAbs().maxCoeff() == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(s2.step_count == 2);
  }
  CHECK_THROWS_AS(gsmvi::adam_step(p, VectorXd::Zero(2), gsmvi::AdamState::zeros(3), adam_config(0.1)),
                  gsmvi::DimensionMismatch);
}

TEST_CASE("run_bbvi") {
  const gsmvi::GaussianTarget target(scalar(2.0, 1.0), "n21");
  SUBCASE("accounting") {
    const gsmvi::Monitor m{gsmvi::Metric::neg_elbo, [](const GaussianParams&) { return 1.0; }, 1};
    const auto res = gsmvi::run_bbvi(
        target, {.iterations = 1, .batch_size = 3, .learning_rate = 0.01, .init = scalar(0, 1), .seed = 0}, &m);
    REQUIRE(res.trace.size() == 1);
    CHECK(res.trace[0].grad_evals == 3);
    CHECK(res.trace[0].algorithm == "bbvi");
  }
  SUBCASE("converges on a 1-D Gaussian") {
    const auto res = gsmvi::run_bbvi(
        target, {.iterations = 2000, .batch_size = 2, .learning_rate = 0.05, .init = scalar(0, 1), .seed = 3});
    CHECK(std::abs(res.final_params.mean()[0] - 2.0) <= 0.1);
  }
  SUBCASE("config validation") {
    CHECK_THROWS_AS(
        (gsmvi::BbviConfig{.iterations = 1, .learning_rate = 2.0, .init = scalar(0, 1)}.validate()),
        gsmvi::InvalidArgument);
    CHECK_THROWS_AS((gsmvi::BbviConfig{.iterations = 0, .init = scalar(0, 1)}.validate()), gsmvi::InvalidArgument);
  }
  SUBCASE("divergence aborts with the partial trace") {
    // Score grows without bound: a large step sends parameters to infinity.
    const auto wild = gsmvi::make_dsl_target(gsmvi::dsl::parse("exp(exp(theta[0]))", 1), 1);
    const gsmvi::Monitor m{gsmvi::Metric::neg_elbo, [](const GaussianParams&) { return 1.0; }, 1};
    CHECK_THROWS_AS(gsmvi::run_bbvi(*wild,
                                    {.iterations = 500, .batch_size = 1, .learning_rate = 1.0, .init = scalar(0, 1)},
                                    &m),
                    gsmvi::RunAborted);
  }
}
