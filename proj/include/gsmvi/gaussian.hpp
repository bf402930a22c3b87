#pragma once

#include <Eigen/Core>

#include "gsmvi/errors.hpp"
#include "gsmvi/rng.hpp"

namespace gsmvi {

/// Opt-in diagonal jitter for covariances that fail to factorize.
/// When enabled, lambda = 1e-10 * tr(cov) / d is added and doubled up to
/// max_doublings times before giving up.
struct JitterPolicy {
  bool enabled = false;
  int max_doublings = 3;
};

/// Multivariate normal N(mean, covariance) with a cached lower Cholesky
/// factor. Immutable after construction.
///
/// The covariance is re-symmetrized as (S + S^T)/2 before factorization.
/// Construction throws NotPositiveDefinite if the factorization fails,
/// NonFiniteValue for non-finite entries and DimensionMismatch for
/// inconsistent shapes.
class GaussianParams {
 public:
  GaussianParams(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance, JitterPolicy jitter = {});

  /// Builds from a lower-triangular factor with strictly positive diagonal.
  /// The factor is stored as given (no refactorization).
  static GaussianParams from_cholesky(Eigen::VectorXd mean, const Eigen::MatrixXd& lower);

  /// N(0, I_d)
  static GaussianParams standard(Eigen::Index d);

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& chol() const { return chol_; }

  /// log |covariance|, from the factor diagonal.
  double log_det() const { return log_det_; }

  /// covariance^{-1} * rhs via two triangular solves.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// L^{-1} * rhs
  Eigen::VectorXd whiten(const Eigen::VectorXd& rhs) const;

 private:
  GaussianParams() = default;
  void finish_from_chol();

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
};

double gaussian_log_density(const GaussianParams& q, const Eigen::VectorXd& point);

/// grad_theta log q(theta) = -covariance^{-1} (theta - mean)
Eigen::VectorXd gaussian_score(const GaussianParams& q, const Eigen::VectorXd& point);

/// mean + L z, where z holds d standard normal draws taken from rng in
/// coordinate order.
Eigen::VectorXd gaussian_sample(const GaussianParams& q, Rng& rng);

/// mean + L z for a caller-supplied z.
Eigen::VectorXd gaussian_transform(const GaussianParams& q, const Eigen::VectorXd& z);

/// KL(q0 || q1) in closed form.
double gaussian_kl(const GaussianParams& q0, const GaussianParams& q1);

void require_finite(const Eigen::VectorXd& v, const char* what);
void require_dim(Eigen::Index expected, Eigen::Index got, const char* what);

}  // namespace gsmvi
