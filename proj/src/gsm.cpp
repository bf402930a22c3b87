#include "gsmvi/gsm.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gsmvi {

void GsmConfig::validate() const {
  if (iterations < 1) throw InvalidArgument("gsm: iterations must be >= 1");
  if (batch_size < 1) throw InvalidArgument("gsm: batch_size must be >= 1");
}

double positive_quadratic_root(double r) {
  if (!std::isfinite(r)) throw NonFiniteValue("solve_rho: right-hand side is not finite");
  if (r < 0.0) throw InvalidArgument("solve_rho: right-hand side must be nonnegative");
  const double s = std::sqrt(1.0 + 4.0 * r);
  if (r < 1e-8) return 2.0 * r / (1.0 + s);
  return 0.5 * (s - 1.0);
}

double solve_rho(const Eigen::VectorXd& g, const GaussianParams& q0, const Eigen::VectorXd& theta) {
  require_dim(q0.dim(), g.size(), "solve_rho score");
  require_dim(q0.dim(), theta.size(), "solve_rho theta");
  const double gsg = g.dot(q0.covariance() * g);
  const double proj = (q0.mean() - theta).dot(g);
  return positive_quadratic_root(gsg + proj * proj);
}

GsmUpdate gsm_update(const GaussianParams& q0, const Eigen::VectorXd& theta, const Eigen::VectorXd& g) {
  const Eigen::Index d = q0.dim();
  require_dim(d, theta.size(), "gsm_update theta");
  require_dim(d, g.size(), "gsm_update score");
  require_finite(theta, "gsm_update theta");
  require_finite(g, "gsm_update score");

  const Eigen::VectorXd offset = q0.mean() - theta;  // mu0 - theta
  GsmUpdateDiagnostics diag;
  diag.epsilon0 = q0.covariance() * g - offset;
  diag.rho = solve_rho(g, q0, theta);

  if ((diag.epsilon0.array() == 0.0).all()) {
    diag.delta_mu = Eigen::VectorXd::Zero(d);
    diag.delta_sigma = Eigen::MatrixXd::Zero(d, d);
    diag.constraint_residual = (q0.solve(-offset) + g).lpNorm<Eigen::Infinity>();
    return {q0, std::move(diag)};
  }

  // Sherman-Morrison inverse of (1+rho) I + (mu0-theta) g^T applied to eps0.
  const double a = 1.0 + diag.rho;
  const double denom = a + offset.dot(g);
  diag.delta_mu = (diag.epsilon0 - offset * (g.dot(diag.epsilon0) / denom)) / a;

  const Eigen::VectorXd mu = q0.mean() + diag.delta_mu;
  const Eigen::VectorXd shifted = mu - theta;
  diag.delta_sigma = offset * offset.transpose() - shifted * shifted.transpose();
  diag.delta_sigma = 0.5 * (diag.delta_sigma + diag.delta_sigma.transpose()).eval();

  const Eigen::MatrixXd sigma = q0.covariance() + diag.delta_sigma;
  try {
    GaussianParams updated(mu, sigma);
    diag.constraint_residual = (updated.solve(theta - mu) + g).lpNorm<Eigen::Infinity>();
    return {std::move(updated), std::move(diag)};
  } catch (const NotPositiveDefinite& e) {
    diag.constraint_residual = std::numeric_limits<double>::infinity();
    throw GsmUpdateError(std::string("gsm_update: ") + e.what(), std::move(diag));
  }
}

GsmStepResult gsm_step(const GaussianParams& q, const TargetModel& model, int batch_size, Rng& rng) {
  if (batch_size < 1) throw InvalidArgument("gsm_step: batch_size must be >= 1");
  require_dim(q.dim(), model.dim(), "gsm_step model");

  std::vector<GsmSampleUpdate> samples;
  samples.reserve(static_cast<std::size_t>(batch_size));
  for (int j = 0; j < batch_size; ++j) {
    Eigen::VectorXd theta = gaussian_sample(q, rng);
    Eigen::VectorXd g = model.grad_log_density(theta);
    require_dim(q.dim(), g.size(), "model score");
    if (!g.allFinite()) throw NonFiniteValue("gsm_step: model score is not finite at a sampled point");
    GsmUpdate update = gsm_update(q, theta, g);
    samples.push_back({std::move(theta), std::move(g), std::move(update)});
  }

  Eigen::VectorXd delta_mu = Eigen::VectorXd::Zero(q.dim());
  Eigen::MatrixXd delta_sigma = Eigen::MatrixXd::Zero(q.dim(), q.dim());
  for (const auto& s : samples) {
    delta_mu += s.update.diagnostics.delta_mu;
    delta_sigma += s.update.diagnostics.delta_sigma;
  }
  const auto b = static_cast<double>(batch_size);
  GaussianParams next(q.mean() + delta_mu / b, q.covariance() + delta_sigma / b);
  return {std::move(next), std::move(samples)};
}

RunResult run_gsm(const TargetModel& model, const GsmConfig& config, const Monitor* monitor,
                  const GsmStepObserver& observer) {
  config.validate();
  require_dim(model.dim(), config.init.dim(), "run_gsm init");

  Rng rng(config.seed);
  GaussianParams q = config.init;
  std::vector<TraceRecord> trace;
  std::int64_t grad_evals = 0;

  for (std::int64_t it = 1; it <= config.iterations; ++it) {
    try {
      GsmStepResult step = gsm_step(q, model, config.batch_size, rng);
      grad_evals += config.batch_size;
      if (observer) observer(it, q, step);
      q = std::move(step.next);
      if (monitor && monitor->due(it, config.iterations))
        trace.push_back({"gsm", 0, it, grad_evals, monitor->metric, monitor->evaluate(q)});
    } catch (const Error& e) {
      throw RunAborted(std::string("gsm run aborted at iteration ") + std::to_string(it) + ": " + e.what(),
                       std::move(trace), it);
    }
  }
  return {std::move(q), std::move(trace), grad_evals};
}

namespace detail {

Eigen::VectorXd mean_update_via_score_difference(const GaussianParams& q0, const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& g) {
  const Eigen::Index d = q0.dim();
  const double rho = solve_rho(g, q0, theta);
  const Eigen::VectorXd offset = q0.mean() - theta;
  const Eigen::MatrixXd a_t =
      (Eigen::MatrixXd::Identity(d, d) - offset * g.transpose() / (1.0 + rho + offset.dot(g))) *
      q0.covariance() / (1.0 + rho);
  return q0.mean() + a_t * (g - gaussian_score(q0, theta));
}

}  // namespace detail

}  // namespace gsmvi
