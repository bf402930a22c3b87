#include "gsmvi/targets.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>

namespace gsmvi {

Eigen::VectorXd TargetModel::sample(Rng&) const {
  throw InvalidArgument("target '" + id() + "' has no exact sampler");
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string gaussian_id(const GaussianTargetSpec& spec) {
  return "gauss:d=" + std::to_string(spec.dim) + ",c=" + format_number(spec.condition_number) +
         ",seed=" + std::to_string(spec.seed) + ",mean=" + (spec.mean_mode == MeanMode::zero ? "zero" : "draw");
}

// log cosh(u) without overflow for large |u|.
double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

GaussianTarget::GaussianTarget(GaussianParams params, std::string id)
    : params_(std::move(params)), id_(std::move(id)) {}

double GaussianTarget::log_density(const Eigen::VectorXd& theta) const {
  return gaussian_log_density(params_, theta);
}

Eigen::VectorXd GaussianTarget::grad_log_density(const Eigen::VectorXd& theta) const {
  return gaussian_score(params_, theta);
}

Eigen::VectorXd GaussianTarget::sample(Rng& rng) const { return gaussian_sample(params_, rng); }

GaussianParams gaussian_target_params(const GaussianTargetSpec& spec) {
  const Eigen::Index d = spec.dim;
  const double c = spec.condition_number;
  if (d < 1) throw InvalidArgument("gaussian target: dimension must be positive");
  if (!(c >= 1.0) || !std::isfinite(c)) throw InvalidArgument("gaussian target: condition number must be >= 1");
  if (d == 1 && c != 1.0) throw InvalidArgument("gaussian target: a 1-D target has condition number 1");

  Rng rng(spec.seed);
  const Eigen::MatrixXd draw = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(draw);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;

  Eigen::VectorXd eig(d);
  constexpr double kSmallest = 0.1;
  for (Eigen::Index k = 0; k < d; ++k)
    eig[k] = d == 1 ? kSmallest : kSmallest * std::pow(c, static_cast<double>(k) / static_cast<double>(d - 1));
  eig[0] = kSmallest;
  eig[d - 1] = kSmallest * c;

  const Eigen::MatrixXd cov = q * eig.asDiagonal() * q.transpose();
  Eigen::VectorXd mean =
      spec.mean_mode == MeanMode::zero ? Eigen::VectorXd::Zero(d) : rng.normal_vector(d);
  return GaussianParams(std::move(mean), cov);
}

std::shared_ptr<const GaussianTarget> make_gaussian_target(const GaussianTargetSpec& spec) {
  return std::make_shared<const GaussianTarget>(gaussian_target_params(spec), gaussian_id(spec));
}

// ---------------------------------------------------------------- sinh-arcsinh

Eigen::VectorXd sinh_arcsinh_forward(const Eigen::VectorXd& z, double skewness, double tail_weight) {
  if (!(tail_weight > 0.0)) throw InvalidArgument("sinh-arcsinh: tail weight must be positive");
  return z.unaryExpr([&](double v) { return std::sinh((std::asinh(v) + skewness) / tail_weight); });
}

Eigen::VectorXd sinh_arcsinh_inverse(const Eigen::VectorXd& x, double skewness, double tail_weight) {
  if (!(tail_weight > 0.0)) throw InvalidArgument("sinh-arcsinh: tail weight must be positive");
  return x.unaryExpr([&](double v) { return std::sinh(tail_weight * std::asinh(v) - skewness); });
}

SinhArcsinhTarget::SinhArcsinhTarget(GaussianParams base, double skewness, double tail_weight, std::string id)
    : base_(std::move(base)), skewness_(skewness), tail_weight_(tail_weight), id_(std::move(id)) {
  if (!(tail_weight_ > 0.0) || !std::isfinite(tail_weight_))
    throw InvalidArgument("sinh-arcsinh: tail weight must be positive");
  if (!std::isfinite(skewness_)) throw InvalidArgument("sinh-arcsinh: skewness must be finite");
}

double SinhArcsinhTarget::log_density(const Eigen::VectorXd& x) const {
  require_dim(dim(), x.size(), "sinh-arcsinh point");
  require_finite(x, "point");
  Eigen::VectorXd z(x.size());
  double log_jac = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = tail_weight_ * std::asinh(x[i]) - skewness_;
    z[i] = std::sinh(u);
    log_jac += std::log(tail_weight_) + log_cosh(u) - 0.5 * std::log1p(x[i] * x[i]);
  }
  return gaussian_log_density(base_, z) + log_jac;
}

Eigen::VectorXd SinhArcsinhTarget::grad_log_density(const Eigen::VectorXd& x) const {
  require_dim(dim(), x.size(), "sinh-arcsinh point");
  require_finite(x, "point");
  const Eigen::Index d = x.size();
  Eigen::VectorXd z(d), jac(d), grad_log_jac(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double u = tail_weight_ * std::asinh(x[i]) - skewness_;
    const double r = std::sqrt(1.0 + x[i] * x[i]);
    z[i] = std::sinh(u);
    jac[i] = tail_weight_ * std::cosh(u) / r;
    grad_log_jac[i] = std::tanh(u) * tail_weight_ / r - x[i] / (r * r);
  }
  return gaussian_score(base_, z).cwiseProduct(jac) + grad_log_jac;
}

Eigen::VectorXd SinhArcsinhTarget::sample(Rng& rng) const {
  return sinh_arcsinh_forward(gaussian_sample(base_, rng), skewness_, tail_weight_);
}

std::shared_ptr<const SinhArcsinhTarget> make_sinh_arcsinh_target(const SinhArcsinhSpec& spec) {
  if (!(spec.tail_weight > 0.0)) throw InvalidArgument("sinh-arcsinh: tail weight must be positive");
  std::string id = "sas:" + gaussian_id(spec.base).substr(6) + ",s=" + format_number(spec.skewness) +
                   ",t=" + format_number(spec.tail_weight);
  return std::make_shared<const SinhArcsinhTarget>(gaussian_target_params(spec.base), spec.skewness,
                                                   spec.tail_weight, std::move(id));
}

// ---------------------------------------------------------------- DSL

DslTarget::DslTarget(dsl::ExprAst program, std::string id) : program_(std::move(program)), id_(std::move(id)) {}

double DslTarget::log_density(const Eigen::VectorXd& theta) const { return dsl::evaluate(program_, theta); }

Eigen::VectorXd DslTarget::grad_log_density(const Eigen::VectorXd& theta) const {
  return dsl::differentiate(program_, theta);
}

std::shared_ptr<const DslTarget> make_dsl_target(const dsl::ExprAst& program, Eigen::Index dim) {
  if (program.dim() != dim)
    throw DimensionMismatch("dsl target: program was parsed for dimension " + std::to_string(program.dim()) +
                            ", requested " + std::to_string(dim));
  return std::make_shared<const DslTarget>(program, "dsl:" + dsl::print(program));
}

}  // namespace gsmvi
