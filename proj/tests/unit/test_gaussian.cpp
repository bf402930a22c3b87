#include <doctest.h>

#include <cmath>
#include <random>

#include "gsmvi/gaussian.hpp"
#include "oracles.hpp"

using gsmvi::GaussianParams;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

GaussianParams scalar(double mu, double var) { return GaussianParams(vec({mu}), MatrixXd::Constant(1, 1, var)); }

}  // namespace

TEST_CASE("log density at hand-evaluated points") {
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  CHECK(gsmvi::gaussian_log_density(GaussianParams::standard(1), vec({0.0})) == doctest::Approx(-half_log_2pi).epsilon(1e-14));
  CHECK(gsmvi::gaussian_log_density(GaussianParams::standard(2), vec({1.0, 1.0})) ==
        doctest::Approx(-std::log(2.0 * M_PI) - 1.0).epsilon(1e-14));
  CHECK(gsmvi::gaussian_log_density(scalar(1.0, 4.0), vec({3.0})) ==
        doctest::Approx(-half_log_2pi - 0.5 * std::log(4.0) - 0.5).epsilon(1e-14));
}

TEST_CASE("log density matches an explicit-inverse oracle") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 8;
    const MatrixXd s = oracle::random_spd(d, gen);
    const VectorXd mu = oracle::random_normal(d, gen);
    const VectorXd x = oracle::random_normal(d, gen, 2.0);
    const GaussianParams q(mu, s);
    CHECK(gsmvi::gaussian_log_density(q, x) == doctest::Approx(oracle::gaussian_log_pdf(x, mu, s)).epsilon(1e-10));
  }
}

TEST_CASE("score examples and finite differences") {
  const VectorXd p = vec({0.3, -1.7, 2.0});
  CHECK((gsmvi::gaussian_score(GaussianParams::standard(3), p) + p).norm() == 0.0);

  MatrixXd diag = MatrixXd::Zero(2, 2);
  diag(0, 0) = 4.0;
  diag(1, 1) = 1.0;
  const VectorXd s = gsmvi::gaussian_score(GaussianParams(VectorXd::Zero(2), diag), vec({2.0, 3.0}));
  CHECK(s[0] == doctest::Approx(-0.5));
  CHECK(s[1] == doctest::Approx(-3.0));

  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 6;
    const GaussianParams q(oracle::random_normal(d, gen), oracle::random_spd(d, gen));
    CHECK(gsmvi::gaussian_score(q, q.mean()).cwiseAbs().maxCoeff() == 0.0);
    const VectorXd x = oracle::random_normal(d, gen, 2.0);
    const VectorXd fd = oracle::fd_gradient([&](const VectorXd& t) { return gsmvi::gaussian_log_density(q, t); }, x);
    CHECK(oracle::rel_error(gsmvi::gaussian_score(q, x), fd) <= 1e-6);
  }
}

TEST_CASE("construction invariants") {
  std::mt19937_64 gen(3);
  const MatrixXd s = oracle::random_spd(5, gen);
  MatrixXd skewed = s;
  skewed(0, 1) += 1e-13;
  const GaussianParams q(VectorXd::Zero(5), skewed);
  const MatrixXd& c = q.covariance();
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * c.cwiseAbs().maxCoeff());
  CHECK((q.chol() * q.chol().transpose() - c).norm() <= 1e-10 * c.norm());
  for (int i = 0; i < 5; ++i) CHECK(q.chol()(i, i) > 0.0);

  MatrixXd indefinite = MatrixXd::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(GaussianParams(VectorXd::Zero(2), indefinite), gsmvi::NotPositiveDefinite);
  CHECK_THROWS_AS(GaussianParams(VectorXd::Zero(3), MatrixXd::Identity(2, 2)), gsmvi::DimensionMismatch);
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(0, 0) = NAN;
  CHECK_THROWS_AS(GaussianParams(VectorXd::Zero(2), bad), gsmvi::NonFiniteValue);
  CHECK_THROWS_AS(gsmvi::gaussian_log_density(GaussianParams::standard(2), VectorXd::Zero(3)), gsmvi::DimensionMismatch);
  CHECK_THROWS_AS(gsmvi::gaussian_log_density(GaussianParams::standard(1), vec({INFINITY})), gsmvi::NonFiniteValue);
}

TEST_CASE("jitter recovers a numerically singular covariance only when enabled") {
  MatrixXd s = MatrixXd::Constant(2, 2, 1.0);  // rank one
  CHECK_THROWS_AS(GaussianParams(VectorXd::Zero(2), s), gsmvi::NotPositiveDefinite);
  const GaussianParams q(VectorXd::Zero(2), s, gsmvi::JitterPolicy{true, 3});
  CHECK(q.chol()(1, 1) > 0.0);
}

TEST_CASE("sampling is an affine map of ordered standard normals") {
  const VectorXd z = vec({0.3, -1.2});
  CHECK(gsmvi::gaussian_transform(GaussianParams::standard(2), z) == z);
  const auto q = GaussianParams::from_cholesky(vec({5.0}), MatrixXd::Constant(1, 1, 2.0));
  CHECK(gsmvi::gaussian_transform(q, vec({1.0}))[0] == 7.0);

  gsmvi::Rng a(99), b(99);
  const GaussianParams q2(vec({1.0, 2.0}), MatrixXd::Identity(2, 2));
  const VectorXd draws = b.normal_vector(2);
  CHECK(gsmvi::gaussian_sample(q2, a) == q2.mean() + draws);

  gsmvi::Rng rng(2024);
  VectorXd sum = VectorXd::Zero(2), score_sum = VectorXd::Zero(2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const VectorXd x = gsmvi::gaussian_sample(q2, rng);
    sum += x;
    score_sum += gsmvi::gaussian_score(q2, x);
  }
  CHECK((sum / n - q2.mean()).cwiseAbs().maxCoeff() <= 0.02);
  // tr(Sigma^{-1}) = 2
  CHECK((score_sum / n).norm() <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("closed-form KL") {
  CHECK(gsmvi::gaussian_kl(scalar(0, 1), scalar(1, 1)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gsmvi::gaussian_kl(scalar(0, 1), scalar(0, 4)) ==
        doctest::Approx(0.5 * (0.25 + std::log(4.0) - 1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(gsmvi::gaussian_kl(GaussianParams::standard(1), GaussianParams::standard(2)), gsmvi::DimensionMismatch);

  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + trial % 8;
    const VectorXd m0 = oracle::random_normal(d, gen), m1 = oracle::random_normal(d, gen);
    const MatrixXd s0 = oracle::random_spd(d, gen), s1 = oracle::random_spd(d, gen);
    const GaussianParams q0(m0, s0), q1(m1, s1);
    const double kl = gsmvi::gaussian_kl(q0, q1);
    CHECK(kl >= 0.0);
    CHECK(kl == doctest::Approx(oracle::gaussian_kl(m0, s0, m1, s1)).epsilon(1e-8));
    CHECK(std::abs(gsmvi::gaussian_kl(q0, q0)) <= 1e-12);
  }
}

TEST_CASE("rng streams") {
  gsmvi::Rng a(7), b(7);
  CHECK(a.normal_matrix(3, 4) == b.normal_matrix(3, 4));
  gsmvi::Rng c(7), d(7);
  const Eigen::MatrixXd m = c.normal_matrix(2, 2);
  VectorXd first(4);
  for (int i = 0; i < 4; ++i) first[i] = d.normal();
  // column-major fill
  CHECK(m(0, 0) == first[0]);
  CHECK(m(1, 0) == first[1]);
  CHECK(m(0, 1) == first[2]);
  gsmvi::Rng run(5), metric = gsmvi::metric_stream(5);
  CHECK(metric.seed() == (5 ^ gsmvi::kMetricStreamKey));
  CHECK(run.normal() != metric.normal());
}
