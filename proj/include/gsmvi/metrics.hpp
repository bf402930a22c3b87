#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "gsmvi/gaussian.hpp"
#include "gsmvi/kernels.hpp"
#include "gsmvi/monitor.hpp"
#include "gsmvi/rng.hpp"
#include "gsmvi/target.hpp"
#include "gsmvi/targets.hpp"

namespace gsmvi {

/// Fixed draws from a target, one per column.
struct ReferenceSampleSet {
  Eigen::MatrixXd samples;
  std::uint64_t generator_seed = 0;
  std::string target_id;

  Eigen::Index count() const { return samples.cols(); }
  Eigen::Index dim() const { return samples.rows(); }
};

/// Draws `count` samples with target.sample from Rng(seed).
ReferenceSampleSet make_reference_samples(const TargetModel& target, std::size_t count = 1000,
                                          std::uint64_t seed = 0);

/// log p at every column of `points`. Gaussian targets go through
/// batch_log_density so that q equal to the target cancels exactly under
/// either execution mode.
Eigen::VectorXd target_log_densities(const TargetModel& target, const Eigen::MatrixXd& points,
                                     Execution exec = Execution::parallel);

struct FklEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean over refs of log p(x) - log q(x). Requires a normalized target.
double forward_kl_mean(const ReferenceSampleSet& refs, const TargetModel& target, const GaussianParams& q,
                       Execution exec = Execution::parallel);

/// forward_kl_mean plus the Monte Carlo standard error of the mean.
FklEstimate forward_kl_estimate(const ReferenceSampleSet& refs, const TargetModel& target, const GaussianParams& q,
                                Execution exec = Execution::parallel);

/// forward_kl_mean with the target log densities computed once. Produces the
/// same values as forward_kl_mean.
class FklEvaluator {
 public:
  FklEvaluator(std::shared_ptr<const ReferenceSampleSet> refs, const TargetModel& target,
               Execution exec = Execution::parallel);

  double operator()(const GaussianParams& q) const;
  const ReferenceSampleSet& refs() const { return *refs_; }

 private:
  std::shared_ptr<const ReferenceSampleSet> refs_;
  Eigen::VectorXd target_log_density_;
  Execution exec_;
};

/// -elbo_estimate over B fresh draws from q taken from `rng`.
double neg_elbo_metric(const GaussianParams& q, const TargetModel& model, int batch_size, Rng& rng);

Monitor make_fkl_monitor(std::shared_ptr<const FklEvaluator> evaluator, std::int64_t every = 1);

/// Owns an Rng on the metric stream of `run_seed`, so evaluating never
/// touches the optimizer's stream.
Monitor make_neg_elbo_monitor(std::shared_ptr<const TargetModel> model, int batch_size, std::uint64_t run_seed,
                              std::int64_t every = 1);

/// Closed-form KL(target || q) for Gaussian targets.
Monitor make_exact_kl_monitor(std::shared_ptr<const GaussianTarget> target, std::int64_t every = 1);

}  // namespace gsmvi
