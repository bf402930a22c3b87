#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "gsmvi/gaussian.hpp"
#include "gsmvi/monitor.hpp"
#include "gsmvi/rng.hpp"
#include "gsmvi/target.hpp"

namespace gsmvi {

/// Intermediates of one closed-form score-matching projection.
struct GsmUpdateDiagnostics {
  double rho = 0.0;
  /// Sigma0 g - mu0 + theta: how far q0 is from satisfying the constraint.
  Eigen::VectorXd epsilon0;
  Eigen::VectorXd delta_mu;
  Eigen::MatrixXd delta_sigma;
  /// ||Sigma_new^{-1}(theta - mu_new) + g||_inf
  double constraint_residual = 0.0;
};

/// gsm_update failed to produce a positive definite covariance.
class GsmUpdateError : public NotPositiveDefinite {
 public:
  GsmUpdateError(const std::string& what, GsmUpdateDiagnostics diagnostics)
      : NotPositiveDefinite(what), diagnostics_(std::move(diagnostics)) {}
  const GsmUpdateDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  GsmUpdateDiagnostics diagnostics_;
};

struct GsmConfig {
  std::int64_t iterations = 1000;
  int batch_size = 2;
  GaussianParams init;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless iterations >= 1 and batch_size >= 1.
  void validate() const;
};

/// Positive root of rho (1 + rho) = r with
/// r = g^T Sigma0 g + ((mu0 - theta)^T g)^2.
double solve_rho(const Eigen::VectorXd& g, const GaussianParams& q0, const Eigen::VectorXd& theta);

/// Same root from r directly. Small r uses the cancellation-free form.
double positive_quadratic_root(double r);

struct GsmUpdate {
  GaussianParams updated;
  GsmUpdateDiagnostics diagnostics;
};

/// Minimizes KL(q0 || q) over Gaussians q subject to
/// grad log q(theta) = g. Closed form:
///
///   eps0  = Sigma0 g - mu0 + theta
///   mu    = mu0 + 1/(1+rho) [I - (mu0-theta) g^T / (1+rho+(mu0-theta)^T g)] eps0
///   Sigma = Sigma0 + (mu0-theta)(mu0-theta)^T - (mu-theta)(mu-theta)^T
///
/// Returns q0 unchanged when eps0 is exactly zero. Throws GsmUpdateError if
/// the new covariance fails to factorize.
GsmUpdate gsm_update(const GaussianParams& q0, const Eigen::VectorXd& theta, const Eigen::VectorXd& g);

struct GsmSampleUpdate {
  Eigen::VectorXd theta;
  Eigen::VectorXd score;
  GsmUpdate update;
};

struct GsmStepResult {
  GaussianParams next;
  std::vector<GsmSampleUpdate> samples;
};

/// One batched iteration: draws B samples from q, projects on each, and
/// averages the per-sample mean and covariance increments. Uses exactly B
/// model gradient evaluations.
GsmStepResult gsm_step(const GaussianParams& q, const TargetModel& model, int batch_size, Rng& rng);

using GsmStepObserver = std::function<void(std::int64_t iteration, const GaussianParams& before,
                                           const GsmStepResult& step)>;

/// Runs config.iterations steps of gsm_step from config.init with an Rng
/// seeded by config.seed. Trace rows are emitted per the monitor cadence
/// (none when monitor is null). Throws RunAborted with the partial trace if
/// an update or model evaluation fails.
RunResult run_gsm(const TargetModel& model, const GsmConfig& config, const Monitor* monitor = nullptr,
                  const GsmStepObserver& observer = {});

namespace detail {

/// Mean update written as mu0 + A (g - grad log q0(theta)) with A formed
/// explicitly. Kept for regression tests against the eps0 route.
Eigen::VectorXd mean_update_via_score_difference(const GaussianParams& q0, const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& g);

}  // namespace detail

}  // namespace gsmvi
