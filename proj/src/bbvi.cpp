#include "gsmvi/bbvi.hpp"

#include <cmath>
#include <string>
#include <tuple>

namespace gsmvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double analytic_entropy(const BbviParams& w) {
  const auto d = static_cast<double>(w.dim());
  return w.chol_unconstrained.diagonal().sum() + 0.5 * d * (1.0 + kLog2Pi);
}

void check_normals(const BbviParams& w, const Eigen::MatrixXd& normals) {
  require_dim(w.dim(), normals.rows(), "reparameterization noise");
  if (normals.cols() < 1) throw InvalidArgument("reparameterization noise must have at least one column");
}

double model_log_density(const TargetModel& model, const Eigen::VectorXd& theta) {
  const double lp = model.log_density(theta);
  if (!std::isfinite(lp)) throw NonFiniteValue("model log density is not finite at a sampled point");
  return lp;
}

Eigen::VectorXd model_score(const TargetModel& model, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g = model.grad_log_density(theta);
  require_dim(theta.size(), g.size(), "model score");
  if (!g.allFinite()) {
    std::string at;
    for (Eigen::Index i = 0; i < theta.size(); ++i) at += (i ? "," : "") + std::to_string(theta[i]);
    throw NonFiniteValue("model score is not finite at sample (" + at + ")");
  }
  return g;
}

}  // namespace

Eigen::MatrixXd BbviParams::chol() const {
  Eigen::MatrixXd l = chol_unconstrained.triangularView<Eigen::Lower>();
  l.diagonal() = chol_unconstrained.diagonal().array().exp().matrix();
  return l;
}

GaussianParams BbviParams::decode() const { return GaussianParams::from_cholesky(mean, chol()); }

BbviParams BbviParams::encode(const GaussianParams& q) {
  BbviParams w;
  w.mean = q.mean();
  w.chol_unconstrained = q.chol().triangularView<Eigen::Lower>();
  w.chol_unconstrained.diagonal() = q.chol().diagonal().array().log().matrix();
  return w;
}

Eigen::VectorXd BbviParams::to_flat() const {
  const Eigen::Index d = dim();
  Eigen::VectorXd flat(flat_size());
  flat.head(d) = mean;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) flat[k++] = chol_unconstrained(i, j);
  return flat;
}

BbviParams BbviParams::from_flat(const Eigen::VectorXd& flat, Eigen::Index d) {
  if (flat.size() != d + d * (d + 1) / 2)
    throw DimensionMismatch("flat parameter vector has length " + std::to_string(flat.size()) +
                            ", expected " + std::to_string(d + d * (d + 1) / 2));
  BbviParams w;
  w.mean = flat.head(d);
  w.chol_unconstrained = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) w.chol_unconstrained(i, j) = flat[k++];
  return w;
}

AdamState AdamState::zeros(Eigen::Index n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
}

void BbviConfig::validate() const {
  if (iterations < 1) throw InvalidArgument("bbvi: iterations must be >= 1");
  if (batch_size < 1) throw InvalidArgument("bbvi: batch_size must be >= 1");
  if (!(learning_rate >= 1e-6 && learning_rate <= 1.0))
    throw InvalidArgument("bbvi: learning_rate must lie in [1e-6, 1]");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw InvalidArgument("bbvi: adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw InvalidArgument("bbvi: adam_beta2 must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw InvalidArgument("bbvi: adam_epsilon must be positive");
}

double elbo_estimate(const BbviParams& w, const TargetModel& model, const std::vector<Eigen::VectorXd>& samples) {
  return elbo_estimate(w.decode(), model, samples);
}

double elbo_estimate(const GaussianParams& q, const TargetModel& model, const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw InvalidArgument("elbo_estimate: sample list is empty");
  double acc = 0.0;
  for (const auto& theta : samples) acc += model_log_density(model, theta) - gaussian_log_density(q, theta);
  return acc / static_cast<double>(samples.size());
}

double reparam_objective(const BbviParams& w, const TargetModel& model, const Eigen::MatrixXd& normals,
                         EntropyEstimator entropy) {
  check_normals(w, normals);
  const GaussianParams q = w.decode();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < normals.cols(); ++j) {
    const Eigen::VectorXd theta = gaussian_transform(q, normals.col(j));
    acc += model_log_density(model, theta);
    if (entropy == EntropyEstimator::per_sample) acc -= gaussian_log_density(q, theta);
  }
  double value = acc / static_cast<double>(normals.cols());
  if (entropy == EntropyEstimator::analytic) value += analytic_entropy(w);
  return value;
}

Eigen::VectorXd reparam_gradient(const BbviParams& w, const TargetModel& model, const Eigen::MatrixXd& normals,
                                 EntropyEstimator entropy) {
  check_normals(w, normals);
  const Eigen::Index d = w.dim();
  const GaussianParams q = w.decode();
  const Eigen::MatrixXd& l = q.chol();

  // Gradient with respect to mean and the (constrained) lower factor.
  Eigen::VectorXd grad_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd grad_l = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < normals.cols(); ++j) {
    const Eigen::VectorXd z = normals.col(j);
    const Eigen::VectorXd theta = gaussian_transform(q, z);
    Eigen::VectorXd g = model_score(model, theta);
    if (entropy == EntropyEstimator::per_sample) {
      // -log q(theta(w); w): path term through theta, then the explicit
      // parameter term. Their mean parts cancel; the factor parts leave
      // 1/L_ii on the diagonal.
      const Eigen::VectorXd u = l.transpose().triangularView<Eigen::Upper>().solve(z);  // Sigma^{-1}(theta-mu)
      g += u;                                                                            // path
      grad_mean -= u;                                                                    // explicit, mean
      grad_l -= u * z.transpose();                                                       // explicit, factor
      grad_l.diagonal() += l.diagonal().cwiseInverse();
    }
    grad_mean += g;
    grad_l += g * z.transpose();
  }
  const auto b = static_cast<double>(normals.cols());
  grad_mean /= b;
  grad_l /= b;

  Eigen::VectorXd flat(w.flat_size());
  flat.head(d) = grad_mean;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index c = 0; c < i; ++c) flat[k++] = grad_l(i, c);
    // Diagonal is stored as log L_ii.
    double diag = grad_l(i, i) * l(i, i);
    if (entropy == EntropyEstimator::analytic) diag += 1.0;
    flat[k++] = diag;
  }
  return flat;
}

Eigen::VectorXd elbo_gradient(const BbviParams& w, const TargetModel& model, int batch_size, Rng& rng,
                              EntropyEstimator entropy) {
  if (batch_size < 1) throw InvalidArgument("elbo_gradient: batch_size must be >= 1");
  return reparam_gradient(w, model, rng.normal_matrix(w.dim(), batch_size), entropy);
}

std::pair<Eigen::VectorXd, AdamState> adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                                                AdamState state, const BbviConfig& config) {
  if (params.size() != grad.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw DimensionMismatch("adam_step: parameter, gradient and state sizes disagree");

  state.step_count += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  state.first_moment = b1 * state.first_moment + (1.0 - b1) * grad;
  state.second_moment = b2 * state.second_moment + (1.0 - b2) * grad.cwiseAbs2();
  const auto t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const Eigen::ArrayXd m_hat = state.first_moment.array() / c1;
  const Eigen::ArrayXd v_hat = state.second_moment.array() / c2;
  Eigen::VectorXd next = params.array() + config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
  return {std::move(next), std::move(state)};
}

RunResult run_bbvi(const TargetModel& model, const BbviConfig& config, const Monitor* monitor) {
  config.validate();
  require_dim(model.dim(), config.init.dim(), "run_bbvi init");

  const Eigen::Index d = model.dim();
  Rng rng(config.seed);
  Eigen::VectorXd flat = BbviParams::encode(config.init).to_flat();
  AdamState adam = AdamState::zeros(flat.size());
  std::vector<TraceRecord> trace;
  std::int64_t grad_evals = 0;

  for (std::int64_t it = 1; it <= config.iterations; ++it) {
    try {
      const BbviParams w = BbviParams::from_flat(flat, d);
      const Eigen::VectorXd grad = elbo_gradient(w, model, config.batch_size, rng, config.entropy);
      grad_evals += config.batch_size;
      std::tie(flat, adam) = adam_step(flat, grad, std::move(adam), config);
      if (!flat.allFinite()) throw NonFiniteValue("parameters became non-finite");
      if (monitor && monitor->due(it, config.iterations)) {
        const GaussianParams q = BbviParams::from_flat(flat, d).decode();
        trace.push_back({"bbvi", 0, it, grad_evals, monitor->metric, monitor->evaluate(q)});
      }
    } catch (const Error& e) {
      throw RunAborted(std::string("bbvi run aborted at iteration ") + std::to_string(it) + ": " + e.what(),
                       std::move(trace), it);
    }
  }
  return {BbviParams::from_flat(flat, d).decode(), std::move(trace), grad_evals};
}

}  // namespace gsmvi
