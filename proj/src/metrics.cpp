#include "gsmvi/metrics.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "gsmvi/bbvi.hpp"

namespace gsmvi {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::fkl_mean:
      return "fkl_mean";
    case Metric::neg_elbo:
      return "neg_elbo";
    case Metric::kl_gauss_exact:
      return "kl_gauss_exact";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : {Metric::fkl_mean, Metric::neg_elbo, Metric::kl_gauss_exact})
    if (metric_name(m) == name) return m;
  return std::nullopt;
}

ReferenceSampleSet make_reference_samples(const TargetModel& target, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("reference samples: count must be positive");
  if (!target.has_exact_sampler()) throw InvalidArgument("reference samples: target '" + target.id() + "' has no sampler");
  Rng rng(seed);
  ReferenceSampleSet refs;
  refs.samples.resize(target.dim(), static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < refs.samples.cols(); ++j) refs.samples.col(j) = target.sample(rng);
  refs.generator_seed = seed;
  refs.target_id = target.id();
  return refs;
}

Eigen::VectorXd target_log_densities(const TargetModel& target, const Eigen::MatrixXd& points, Execution exec) {
  if (const auto* gauss = dynamic_cast<const GaussianTarget*>(&target))
    return batch_log_density(gauss->params(), points, exec);
  return batch_target_log_density(target, points, exec);
}

namespace {

void check_fkl_inputs(const ReferenceSampleSet& refs, const TargetModel& target) {
  if (!target.normalizer_known())
    throw InvalidArgument("forward KL needs a normalized target; '" + target.id() + "' is unnormalized");
  require_dim(target.dim(), refs.dim(), "reference samples");
  if (refs.count() == 0) throw InvalidArgument("forward KL: reference set is empty");
}

FklEstimate summarize(const Eigen::VectorXd& diff) {
  const double n = static_cast<double>(diff.size());
  const double mean = diff.sum() / n;
  double se = 0.0;
  if (diff.size() > 1) se = std::sqrt((diff.array() - mean).square().sum() / (n - 1.0) / n);
  return {mean, se};
}

}  // namespace

double forward_kl_mean(const ReferenceSampleSet& refs, const TargetModel& target, const GaussianParams& q,
                       Execution exec) {
  return forward_kl_estimate(refs, target, q, exec).mean;
}

FklEstimate forward_kl_estimate(const ReferenceSampleSet& refs, const TargetModel& target, const GaussianParams& q,
                                Execution exec) {
  check_fkl_inputs(refs, target);
  require_dim(target.dim(), q.dim(), "variational distribution");
  const Eigen::VectorXd lp = target_log_densities(target, refs.samples, exec);
  const Eigen::VectorXd lq = batch_log_density(q, refs.samples, exec);
  return summarize(lp - lq);
}

FklEvaluator::FklEvaluator(std::shared_ptr<const ReferenceSampleSet> refs, const TargetModel& target, Execution exec)
    : refs_(std::move(refs)), exec_(exec) {
  if (!refs_) throw InvalidArgument("FklEvaluator: null reference set");
  check_fkl_inputs(*refs_, target);
  target_log_density_ = target_log_densities(target, refs_->samples, exec_);
}

double FklEvaluator::operator()(const GaussianParams& q) const {
  require_dim(refs_->dim(), q.dim(), "variational distribution");
  const Eigen::VectorXd lq = batch_log_density(q, refs_->samples, exec_);
  return (target_log_density_ - lq).sum() / static_cast<double>(lq.size());
}

double neg_elbo_metric(const GaussianParams& q, const TargetModel& model, int batch_size, Rng& rng) {
  if (batch_size < 1) throw InvalidArgument("neg_elbo_metric: batch size must be >= 1");
  require_dim(model.dim(), q.dim(), "variational distribution");
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(static_cast<std::size_t>(batch_size));
  for (int j = 0; j < batch_size; ++j) samples.push_back(gaussian_sample(q, rng));
  return -elbo_estimate(q, model, samples);
}

Monitor make_fkl_monitor(std::shared_ptr<const FklEvaluator> evaluator, std::int64_t every) {
  if (every < 1) throw InvalidArgument("monitor cadence must be >= 1");
  return {Metric::fkl_mean, [evaluator = std::move(evaluator)](const GaussianParams& q) { return (*evaluator)(q); },
          every};
}

Monitor make_neg_elbo_monitor(std::shared_ptr<const TargetModel> model, int batch_size, std::uint64_t run_seed,
                              std::int64_t every) {
  if (every < 1) throw InvalidArgument("monitor cadence must be >= 1");
  if (batch_size < 1) throw InvalidArgument("neg_elbo monitor: batch size must be >= 1");
  auto rng = std::make_shared<Rng>(metric_stream(run_seed));
  return {Metric::neg_elbo,
          [model = std::move(model), batch_size, rng](const GaussianParams& q) {
            return neg_elbo_metric(q, *model, batch_size, *rng);
          },
          every};
}

Monitor make_exact_kl_monitor(std::shared_ptr<const GaussianTarget> target, std::int64_t every) {
  if (every < 1) throw InvalidArgument("monitor cadence must be >= 1");
  return {Metric::kl_gauss_exact,
          [target = std::move(target)](const GaussianParams& q) { return gaussian_kl(target->params(), q); }, every};
}

}  // namespace gsmvi
