#pragma once

#include <string>

#include <Eigen/Core>

#include "gsmvi/rng.hpp"

namespace gsmvi {

/// Unnormalized log density log p(theta, x) and its score. Everything the
/// inference algorithms may query about a model.
///
/// Implementations are immutable; evaluation must be reentrant.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd grad_log_density(const Eigen::VectorXd& theta) const = 0;

  virtual bool has_exact_sampler() const { return false; }
  /// Throws InvalidArgument unless has_exact_sampler().
  virtual Eigen::VectorXd sample(Rng& rng) const;

  /// True when log_density is the exact normalized log density.
  virtual bool normalizer_known() const { return false; }

  virtual std::string id() const = 0;
};

}  // namespace gsmvi
