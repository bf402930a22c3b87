#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsmvi/gaussian.hpp"
#include "gsmvi/monitor.hpp"
#include "gsmvi/rng.hpp"
#include "gsmvi/target.hpp"

namespace gsmvi {

/// Unconstrained Gaussian parameterization: mean plus a lower-triangular
/// factor whose diagonal is stored as log-values.
///
/// Flat layout (used by the optimizer): the d mean entries, then the lower
/// triangle row by row (row i holds columns 0..i).
struct BbviParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_unconstrained;

  Eigen::Index dim() const { return mean.size(); }
  Eigen::Index flat_size() const { return dim() + dim() * (dim() + 1) / 2; }

  /// Lower factor with exp() applied to the diagonal.
  Eigen::MatrixXd chol() const;
  GaussianParams decode() const;
  static BbviParams encode(const GaussianParams& q);

  Eigen::VectorXd to_flat() const;
  static BbviParams from_flat(const Eigen::VectorXd& flat, Eigen::Index d);
};

/// How the -E_q[log q] part of the ELBO is estimated.
enum class EntropyEstimator {
  /// Closed-form Gaussian entropy.
  analytic,
  /// Per-sample -log q(theta_j) differentiated through the
  /// reparameterization (both path and parameter terms).
  per_sample,
};

struct BbviConfig {
  std::int64_t iterations = 10000;
  int batch_size = 2;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  GaussianParams init;
  std::uint64_t seed = 0;
  EntropyEstimator entropy = EntropyEstimator::analytic;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step_count = 0;

  static AdamState zeros(Eigen::Index n);
};

/// Mean over samples of log p(theta_j) - log q_w(theta_j).
double elbo_estimate(const BbviParams& w, const TargetModel& model, const std::vector<Eigen::VectorXd>& samples);
double elbo_estimate(const GaussianParams& q, const TargetModel& model, const std::vector<Eigen::VectorXd>& samples);

/// Reparameterized ELBO objective for fixed standard-normal draws (one per
/// column of `normals`): mean_j log p(mu + L z_j) plus the entropy term.
double reparam_objective(const BbviParams& w, const TargetModel& model, const Eigen::MatrixXd& normals,
                         EntropyEstimator entropy = EntropyEstimator::analytic);

/// Exact gradient of reparam_objective with respect to the flat parameters.
Eigen::VectorXd reparam_gradient(const BbviParams& w, const TargetModel& model, const Eigen::MatrixXd& normals,
                                 EntropyEstimator entropy = EntropyEstimator::analytic);

/// Draws B standard-normal vectors from rng and returns reparam_gradient.
/// Costs B model gradient evaluations.
Eigen::VectorXd elbo_gradient(const BbviParams& w, const TargetModel& model, int batch_size, Rng& rng,
                              EntropyEstimator entropy = EntropyEstimator::analytic);

/// Bias-corrected ADAM ascent step.
std::pair<Eigen::VectorXd, AdamState> adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                                                AdamState state, const BbviConfig& config);

/// Algorithm-2 style loop: elbo_gradient + adam_step for config.iterations
/// steps. Throws RunAborted with the partial trace on non-finite parameters.
RunResult run_bbvi(const TargetModel& model, const BbviConfig& config, const Monitor* monitor = nullptr);

}  // namespace gsmvi
