#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace oracle {

Vec random_normal(int d, std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = n(gen);
  return v;
}

Mat random_spd(int d, std::mt19937_64& gen, double lo, double hi) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(gen);
  Eigen::HouseholderQR<Mat> qr(a);
  const Mat q = qr.householderQ();
  Vec eig(d);
  for (int i = 0; i < d; ++i) eig[i] = std::exp(u(gen));
  Mat s = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

double gaussian_log_pdf(const Vec& x, const Vec& mu, const Mat& S) {
  const Eigen::FullPivLU<Mat> lu(S);
  const Vec r = x - mu;
  const double quad = r.dot(lu.inverse() * r);
  const double d = static_cast<double>(x.size());
  return -0.5 * (quad + std::log(lu.determinant()) + d * std::log(2.0 * M_PI));
}

double gaussian_kl(const Vec& m0, const Mat& S0, const Vec& m1, const Mat& S1) {
  const Eigen::FullPivLU<Mat> lu1(S1), lu0(S0);
  const Mat inv1 = lu1.inverse();
  const Vec r = m1 - m0;
  const double d = static_cast<double>(m0.size());
  return 0.5 * ((inv1 * S0).trace() + r.dot(inv1 * r) - d + std::log(lu1.determinant() / lu0.determinant()));
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

Projection project_1d(double mu0, double v0, double theta, double g) {
  auto kl = [&](double log_v) {
    const double v = std::exp(log_v);
    const double mu = theta + v * g;
    return 0.5 * (v0 / v + (mu - mu0) * (mu - mu0) / v - 1.0 + log_v - std::log(v0));
  };
  const double log_v = golden_section(kl, std::log(1e-10), std::log(1e6), 1e-10);
  const double v = std::exp(log_v);
  Projection p;
  p.mean = Vec::Constant(1, theta + v * g);
  p.cov = Mat::Constant(1, 1, v);
  p.constraint = std::abs((theta - p.mean[0]) / v + g);
  return p;
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Vec p = x;
    auto at = [&](double k) {
      p[i] = x[i] + k * step;
      return f(p);
    };
    grad[i] = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * step);
  }
  return grad;
}

double rel_error(const Vec& a, const Vec& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

namespace {

struct Unpacked {
  Vec mu;
  Mat lower;
};

Unpacked unpack(const Vec& x, int d) {
  Unpacked u{x.head(d), Mat::Zero(d, d)};
  int k = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) u.lower(i, j) = i == j ? std::exp(x[k++]) : x[k++];
  return u;
}

Vec pack(const Vec& mu, const Mat& S) {
  const int d = static_cast<int>(mu.size());
  const Mat lower = Eigen::LLT<Mat>(S).matrixL();
  Vec x(d + d * (d + 1) / 2);
  x.head(d) = mu;
  int k = d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) x[k++] = i == j ? std::log(lower(i, i)) : lower(i, j);
  return x;
}

// Quasi-Newton minimization with Armijo backtracking. Returns the final
// gradient norm.
double bfgs(const std::function<double(const Vec&)>& f, Vec& x, double gtol, int max_iter) {
  const Eigen::Index n = x.size();
  Mat h = Mat::Identity(n, n);
  double fx = f(x);
  Vec g = fd_gradient(f, x, 1e-4);
  for (int it = 0; it < max_iter && g.norm() > gtol; ++it) {
    Vec p = -h * g;
    if (p.dot(g) >= 0) {
      h = Mat::Identity(n, n);
      p = -g;
    }
    double step = 1.0, fn = 0.0;
    Vec xn;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * p;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * g.dot(p)) break;
      step *= 0.5;
    }
    if (!std::isfinite(fn) || fn > fx) break;
    const Vec gn = fd_gradient(f, xn, 1e-4);
    const Vec s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Mat eye = Mat::Identity(n, n);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  return g.norm();
}

}  // namespace

Projection project_penalty(const Vec& mu0, const Mat& S0, const Vec& theta, const Vec& g) {
  const int d = static_cast<int>(mu0.size());
  const double logdet0 = std::log(Eigen::FullPivLU<Mat>(S0).determinant());

  auto constraint = [&](const Unpacked& u) {
    const auto tri = u.lower.triangularView<Eigen::Lower>();
    Vec r = tri.solve(theta - u.mu);
    return Vec(tri.transpose().solve(r) + g);
  };
  auto kl = [&](const Unpacked& u) {
    const auto tri = u.lower.triangularView<Eigen::Lower>();
    const Mat a = tri.solve(S0);
    const Mat sinv_s0 = tri.transpose().solve(a);
    const Vec r = tri.solve(u.mu - mu0);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(u.lower(i, i));
    return 0.5 * (sinv_s0.trace() + r.squaredNorm() - d + logdet - logdet0);
  };

  Vec x = pack(mu0, S0);
  Vec lambda = Vec::Zero(d);
  double c = 10.0;
  double grad_norm = 0.0;
  for (int outer = 0; outer < 60; ++outer) {
    auto lagrangian = [&](const Vec& v) {
      const Unpacked u = unpack(v, d);
      const Vec h = constraint(u);
      const double val = kl(u) + lambda.dot(h) + 0.5 * c * h.squaredNorm();
      return std::isfinite(val) ? val : std::numeric_limits<double>::infinity();
    };
    grad_norm = bfgs(lagrangian, x, 1e-9, 400);
    const Vec h = constraint(unpack(x, d));
    lambda += c * h;
    if (h.cwiseAbs().maxCoeff() < 1e-11 && grad_norm <= 1e-8) break;
    c = std::min(2.0 * c, 1e4);
  }
  const Unpacked u = unpack(x, d);
  Projection p;
  p.mean = u.mu;
  p.cov = u.lower * u.lower.transpose();
  p.grad_norm = grad_norm;
  p.constraint = constraint(u).cwiseAbs().maxCoeff();
  return p;
}

namespace {

class ProgramGen {
 public:
  ProgramGen(int dim, std::mt19937_64& gen) : dim_(dim), gen_(gen) {}

  std::string expr(int depth, bool in_sum) {
    if (depth <= 0) return leaf(in_sum);
    switch (pick(in_sum ? 12 : 13)) {
      case 0: return "(" + expr(depth - 1, in_sum) + " + " + expr(depth - 1, in_sum) + ")";
      case 1: return "(" + expr(depth - 1, in_sum) + " - " + expr(depth - 1, in_sum) + ")";
      case 2: return "(" + expr(depth - 1, in_sum) + " * " + expr(depth - 1, in_sum) + ")";
      case 3: return "(" + expr(depth - 1, in_sum) + " / (1 + (" + expr(depth - 1, in_sum) + ")^2))";
      case 4: return "(" + expr(depth - 1, in_sum) + ")^" + std::to_string(1 + pick(3));
      case 5: return "-" + atom(depth - 1, in_sum);
      case 6: return "exp(tanh(" + expr(depth - 1, in_sum) + "))";
      case 7: return "log(1 + (" + expr(depth - 1, in_sum) + ")^2)";
      case 8: return "sqrt(2 + (" + expr(depth - 1, in_sum) + ")^2)";
      case 9: return "asinh(" + expr(depth - 1, in_sum) + ")";
      case 10: return "cosh(tanh(" + expr(depth - 1, in_sum) + "))";
      case 11: return "sinh(tanh(" + expr(depth - 1, in_sum) + "))";
      default: return "sum(" + expr(depth - 1, true) + ")";
    }
  }

 private:
  std::string atom(int depth, bool in_sum) { return "(" + expr(depth, in_sum) + ")"; }

  std::string leaf(bool in_sum) {
    switch (pick(in_sum ? 5 : 3)) {
      case 0: {
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        std::ostringstream os;
        os.precision(3);
        os << std::fixed << std::abs(u(gen_));
        return os.str();
      }
      case 1: return "theta[" + std::to_string(pick(dim_)) + "]";
      case 2: return "dot(theta, theta)";
      case 3: return "theta[i]";
      default: return "i";
    }
  }

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(gen_); }

  int dim_;
  std::mt19937_64& gen_;
};

}  // namespace

std::string random_program(int dim, std::mt19937_64& gen, int depth) { return ProgramGen(dim, gen).expr(depth, false); }

}  // namespace oracle
