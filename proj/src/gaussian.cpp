#include "gsmvi/gaussian.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace gsmvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

bool try_factor(const Eigen::MatrixXd& sym, Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Eigen::Index i = 0; i < lower.rows(); ++i)
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  return true;
}

}  // namespace

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteValue(std::string(what) + " contains non-finite entries");
}

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got)
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(expected) +
                            ", got " + std::to_string(got));
}

GaussianParams::GaussianParams(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance,
                               JitterPolicy jitter)
    : mean_(std::move(mean)) {
  const Eigen::Index d = mean_.size();
  if (d < 1) throw InvalidArgument("Gaussian dimension must be positive");
  if (covariance.rows() != d || covariance.cols() != d)
    throw DimensionMismatch("covariance shape does not match mean length " + std::to_string(d));
  require_finite(mean_, "mean");
  if (!covariance.allFinite()) throw NonFiniteValue("covariance contains non-finite entries");

  cov_ = 0.5 * (covariance + covariance.transpose());
  if (!try_factor(cov_, chol_)) {
    bool recovered = false;
    if (jitter.enabled) {
      double lambda = 1e-10 * cov_.trace() / static_cast<double>(d);
      for (int attempt = 0; attempt <= jitter.max_doublings && !recovered; ++attempt) {
        Eigen::MatrixXd shifted = cov_;
        shifted.diagonal().array() += lambda;
        if (try_factor(shifted, chol_)) {
          cov_ = shifted;
          recovered = true;
        }
        lambda *= 2.0;
      }
    }
    if (!recovered) throw NotPositiveDefinite("lost positive definiteness: covariance is not positive definite");
  }
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

GaussianParams GaussianParams::from_cholesky(Eigen::VectorXd mean, const Eigen::MatrixXd& lower) {
  const Eigen::Index d = mean.size();
  if (d < 1) throw InvalidArgument("Gaussian dimension must be positive");
  if (lower.rows() != d || lower.cols() != d)
    throw DimensionMismatch("Cholesky factor shape does not match mean length " + std::to_string(d));
  require_finite(mean, "mean");
  if (!lower.allFinite()) throw NonFiniteValue("Cholesky factor contains non-finite entries");
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(lower(i, i) > 0.0)) throw NotPositiveDefinite("Cholesky factor has a non-positive diagonal");

  GaussianParams q;
  q.mean_ = std::move(mean);
  q.chol_ = lower.triangularView<Eigen::Lower>();
  q.cov_ = q.chol_ * q.chol_.transpose();
  q.cov_ = 0.5 * (q.cov_ + q.cov_.transpose()).eval();
  q.log_det_ = 2.0 * q.chol_.diagonal().array().log().sum();
  return q;
}

GaussianParams GaussianParams::standard(Eigen::Index d) {
  return from_cholesky(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
}

Eigen::VectorXd GaussianParams::whiten(const Eigen::VectorXd& rhs) const {
  return chol_.triangularView<Eigen::Lower>().solve(rhs);
}

Eigen::VectorXd GaussianParams::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd y = whiten(rhs);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double gaussian_log_density(const GaussianParams& q, const Eigen::VectorXd& point) {
  require_dim(q.dim(), point.size(), "gaussian_log_density point");
  require_finite(point, "point");
  const Eigen::VectorXd z = q.whiten(point - q.mean());
  return -0.5 * (z.squaredNorm() + q.log_det() + static_cast<double>(q.dim()) * kLog2Pi);
}

Eigen::VectorXd gaussian_score(const GaussianParams& q, const Eigen::VectorXd& point) {
  require_dim(q.dim(), point.size(), "gaussian_score point");
  require_finite(point, "point");
  return -q.solve(point - q.mean());
}

Eigen::VectorXd gaussian_transform(const GaussianParams& q, const Eigen::VectorXd& z) {
  require_dim(q.dim(), z.size(), "gaussian_transform noise");
  return q.mean() + q.chol().triangularView<Eigen::Lower>() * z;
}

Eigen::VectorXd gaussian_sample(const GaussianParams& q, Rng& rng) {
  return gaussian_transform(q, rng.normal_vector(q.dim()));
}

double gaussian_kl(const GaussianParams& q0, const GaussianParams& q1) {
  require_dim(q0.dim(), q1.dim(), "gaussian_kl");
  const auto d = static_cast<double>(q0.dim());
  // tr(S1^{-1} S0) = ||L1^{-1} L0||_F^2
  const Eigen::MatrixXd m = q1.chol().triangularView<Eigen::Lower>().solve(q0.chol());
  const Eigen::VectorXd dm = q1.whiten(q1.mean() - q0.mean());
  const double kl = 0.5 * (m.squaredNorm() + dm.squaredNorm() - d + q1.log_det() - q0.log_det());
  return kl > 0.0 ? kl : 0.0;
}

}  // namespace gsmvi
