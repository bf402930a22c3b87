#include "gsmvi/harness.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>

#include "gsmvi/bbvi.hpp"
#include "gsmvi/gsm.hpp"
#include "gsmvi/metrics.hpp"
#include "gsmvi/targets.hpp"
#include "gsmvi/trace_csv.hpp"

namespace gsmvi {

std::shared_ptr<const TargetModel> build_target(const TargetSpec& spec) {
  switch (spec.kind) {
    case TargetSpec::Kind::gauss:
      return make_gaussian_target(spec.sas.base);
    case TargetSpec::Kind::sas:
      return make_sinh_arcsinh_target(spec.sas);
    case TargetSpec::Kind::dsl: {
      std::ifstream is(spec.dsl_path, std::ios::binary);
      if (!is) throw Error("cannot read DSL program '" + spec.dsl_path.string() + "'");
      std::ostringstream buf;
      buf << is.rdbuf();
      return make_dsl_target(dsl::parse(buf.str(), spec.dsl_dim), spec.dsl_dim);
    }
  }
  throw InvalidArgument("unknown target kind");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

VectorFieldRow vector_field_point(const TargetModel& target, double mu, double sigma, int samples,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const GaussianParams q0(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sigma * sigma));
  double dmu = 0.0, dsigma = 0.0;
  for (int j = 0; j < samples; ++j) {
    const Eigen::VectorXd theta = gaussian_sample(q0, rng);
    const GsmUpdate up = gsm_update(q0, theta, target.grad_log_density(theta));
    dmu += up.updated.mean()[0] - mu;
    dsigma += std::sqrt(up.updated.covariance()(0, 0)) - sigma;
  }
  return {mu, sigma, dmu / samples, dsigma / samples};
}

}  // namespace

std::vector<VectorFieldRow> gsm_vector_field(const TargetModel& target, int resolution, int samples,
                                             std::uint64_t seed, Execution exec) {
  if (target.dim() != 1) throw DimensionMismatch("vector field needs a 1-D target");
  if (resolution < 2) throw InvalidArgument("vector field resolution must be >= 2");
  if (samples < 1) throw InvalidArgument("vector field needs at least one sample per point");
  const int n = resolution * resolution;
  std::vector<VectorFieldRow> rows(static_cast<std::size_t>(n));
  auto point = [&](int k) {
    const int i = k / resolution, j = k % resolution;
    const double mu = -2.0 + 4.0 * i / (resolution - 1);
    const double sigma = 0.2 + 2.8 * j / (resolution - 1);
    rows[static_cast<std::size_t>(k)] =
        vector_field_point(target, mu, sigma, samples, splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(k))));
  };
  if (exec == Execution::serial) {
    for (int k = 0; k < n; ++k) point(k);
    return rows;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    try {
      point(k);
    } catch (...) {
#pragma omp critical(gsmvi_vector_field_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string vector_field_csv_text(const std::vector<VectorFieldRow>& rows) {
  std::string out = "mu,sigma,dmu,dsigma\n";
  for (const auto& r : rows)
    out += format_real(r.mu) + "," + format_real(r.sigma) + "," + format_real(r.dmu) + "," + format_real(r.dsigma) + "\n";
  return out;
}

namespace {

struct Case {
  std::filesystem::path dir;
  TargetSpec spec;
};

TargetSpec gauss_spec(const ExperimentConfig& cfg, int d, double c) {
  TargetSpec s;
  s.kind = TargetSpec::Kind::gauss;
  s.sas.base = {d, c, cfg.target_seed, cfg.target_mean};
  return s;
}

std::vector<Case> experiment_cases(const ExperimentConfig& cfg) {
  std::vector<Case> cases;
  switch (cfg.experiment) {
    case Experiment::fit:
      cases.push_back({cfg.output_dir, *cfg.target});
      break;
    case Experiment::dims:
      for (int d : cfg.dims_values)
        cases.push_back({cfg.output_dir / ("d" + std::to_string(d)), gauss_spec(cfg, d, cfg.dims_cond)});
      break;
    case Experiment::cond:
      for (double c : cfg.cond_values)
        cases.push_back({cfg.output_dir / ("c" + format_real(c)), gauss_spec(cfg, cfg.cond_dim, c)});
      break;
    case Experiment::nongauss: {
      std::set<std::pair<double, double>> seen;
      auto add = [&](double s, double t) {
        if (!seen.insert({s, t}).second) return;
        TargetSpec spec = gauss_spec(cfg, cfg.nongauss_dim, cfg.nongauss_cond);
        spec.kind = TargetSpec::Kind::sas;
        spec.sas.skewness = s;
        spec.sas.tail_weight = t;
        cases.push_back({cfg.output_dir / ("s" + format_real(s) + "_t" + format_real(t)), spec});
      };
      for (double s : cfg.nongauss_skews) add(s, 1.0);
      for (double t : cfg.nongauss_tails) add(0.0, t);
      break;
    }
    case Experiment::vectorfield:
      break;
  }
  return cases;
}

struct Variant {
  std::string label;
  bool gsm = true;
  double learning_rate = 0.0;
};

std::vector<Variant> experiment_variants(const ExperimentConfig& cfg) {
  std::vector<Variant> v;
  if (cfg.algorithm != AlgorithmChoice::bbvi) v.push_back({"gsm", true, 0.0});
  if (cfg.algorithm != AlgorithmChoice::gsm)
    for (double lr : cfg.bbvi_learning_rates) v.push_back({"bbvi@" + format_real(lr), false, lr});
  return v;
}

// Per-case state shared read-only by that case's runs.
struct CaseContext {
  std::shared_ptr<const TargetModel> target;
  Metric metric = Metric::fkl_mean;
  std::shared_ptr<const FklEvaluator> fkl;
};

CaseContext prepare_case(const ExperimentConfig& cfg, const Case& c) {
  CaseContext ctx;
  ctx.target = build_target(c.spec);
  const bool fkl_ok = ctx.target->normalizer_known() && ctx.target->has_exact_sampler();
  ctx.metric = cfg.metric.value_or(fkl_ok ? Metric::fkl_mean : Metric::neg_elbo);
  if (ctx.metric == Metric::fkl_mean) {
    if (!fkl_ok) throw ConfigError("metric: fkl_mean is unavailable for target " + ctx.target->id());
    auto refs = std::make_shared<const ReferenceSampleSet>(
        make_reference_samples(*ctx.target, static_cast<std::size_t>(cfg.reference_samples), cfg.reference_seed));
    ctx.fkl = std::make_shared<const FklEvaluator>(refs, *ctx.target);
  }
  if (ctx.metric == Metric::kl_gauss_exact && !std::dynamic_pointer_cast<const GaussianTarget>(ctx.target))
    throw ConfigError("metric: kl_gauss_exact needs a Gaussian target");
  return ctx;
}

Monitor make_monitor(const ExperimentConfig& cfg, const CaseContext& ctx, std::uint64_t run_seed) {
  switch (ctx.metric) {
    case Metric::fkl_mean:
      return make_fkl_monitor(ctx.fkl, cfg.monitor_every);
    case Metric::neg_elbo:
      return make_neg_elbo_monitor(ctx.target, cfg.neg_elbo_samples, run_seed, cfg.monitor_every);
    case Metric::kl_gauss_exact:
      return make_exact_kl_monitor(std::dynamic_pointer_cast<const GaussianTarget>(ctx.target), cfg.monitor_every);
  }
  throw InvalidArgument("unknown metric");
}

struct JobResult {
  std::vector<TraceRecord> trace;
  std::optional<std::string> error;
};

JobResult run_job(const ExperimentConfig& cfg, const CaseContext& ctx, const Variant& variant, int run) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(run);
  const Eigen::Index d = ctx.target->dim();
  const GaussianParams init(Eigen::VectorXd::Constant(d, cfg.init_mean),
                            Eigen::MatrixXd::Identity(d, d) * (cfg.init_scale * cfg.init_scale));
  const Monitor monitor = make_monitor(cfg, ctx, seed);
  const int batch = variant.gsm ? cfg.gsm_batch_size : cfg.bbvi_batch_size;

  JobResult result;
  try {
    if (variant.gsm) {
      const GsmConfig gc{.iterations = cfg.gsm_iterations, .batch_size = batch, .init = init, .seed = seed};
      result.trace = run_gsm(*ctx.target, gc, &monitor).trace;
    } else {
      const BbviConfig bc{.iterations = cfg.bbvi_iterations,
                          .batch_size = batch,
                          .learning_rate = variant.learning_rate,
                          .adam_beta1 = cfg.bbvi_beta1,
                          .adam_beta2 = cfg.bbvi_beta2,
                          .adam_epsilon = cfg.bbvi_adam_epsilon,
                          .init = init,
                          .seed = seed,
                          .entropy = cfg.bbvi_entropy};
      result.trace = run_bbvi(*ctx.target, bc, &monitor).trace;
    }
  } catch (const RunAborted& e) {
    result.trace = e.trace();
    result.error = e.what();
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  for (auto& r : result.trace) {
    r.algorithm = variant.label;
    r.run_id = run;
    if (r.grad_evals != r.iteration * batch) throw Error("gradient evaluation accounting broken in " + variant.label);
  }
  return result;
}

ExperimentConfig case_echo_config(const ExperimentConfig& cfg, const Case& c) {
  ExperimentConfig echo = cfg;
  echo.experiment = Experiment::fit;
  echo.target = c.spec;
  echo.output_dir = c.dir;
  return echo;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.threads > 0) omp_set_num_threads(config.threads);
  ExperimentOutcome outcome;
  std::filesystem::create_directories(config.output_dir);

  if (config.experiment == Experiment::vectorfield) {
    const GaussianTarget target(GaussianParams::standard(1), "normal:d=1");
    const auto rows = gsm_vector_field(target, config.vectorfield_resolution, config.vectorfield_samples,
                                       config.base_seed);
    const auto path = config.output_dir / "vectorfield.csv";
    write_text_file(path, vector_field_csv_text(rows));
    write_text_file(config.output_dir / "config.echo", echo_config(config));
    outcome.files = {path, config.output_dir / "config.echo"};
    return outcome;
  }

  const auto cases = experiment_cases(config);
  const auto variants = experiment_variants(config);
  std::vector<CaseContext> contexts;
  contexts.reserve(cases.size());
  for (const auto& c : cases) contexts.push_back(prepare_case(config, c));

  struct Job {
    std::size_t case_index, variant_index;
    int run;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < cases.size(); ++ci)
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
      for (int r = 0; r < config.runs; ++r) jobs.push_back({ci, vi, r});

  // Each job owns its seed and output slot; the merge below is serial, so
  // the files do not depend on scheduling.
  std::vector<JobResult> results(jobs.size());
  const auto job_count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < job_count; ++k) {
    const Job& job = jobs[static_cast<std::size_t>(k)];
    try {
      results[static_cast<std::size_t>(k)] =
          run_job(config, contexts[job.case_index], variants[job.variant_index], job.run);
    } catch (const std::exception& e) {
      results[static_cast<std::size_t>(k)].error = e.what();
    }
  }

  if (config.experiment != Experiment::fit) {
    write_text_file(config.output_dir / "config.echo", echo_config(config));
    outcome.files.push_back(config.output_dir / "config.echo");
  }

  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    std::filesystem::create_directories(c.dir);
    std::vector<TraceRecord> records;
    // label -> sum of final values over runs (infinite if any run failed)
    std::map<std::string, double> final_sum;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      if (jobs[k].case_index != ci) continue;
      const Variant& v = variants[jobs[k].variant_index];
      const JobResult& res = results[k];
      records.insert(records.end(), res.trace.begin(), res.trace.end());
      double last = std::numeric_limits<double>::infinity();
      if (res.error) {
        outcome.failures.push_back(c.dir.string() + " " + v.label + " run " + std::to_string(jobs[k].run) + ": " +
                                   *res.error);
      } else if (!res.trace.empty() && std::isfinite(res.trace.back().value)) {
        last = res.trace.back().value;
      }
      final_sum[v.label] += last;
    }

    const auto echo_path = c.dir / "config.echo";
    write_text_file(echo_path, echo_config(case_echo_config(config, c)));
    outcome.files.push_back(echo_path);
    if (!records.empty()) {
      const auto trace_path = c.dir / "trace.csv";
      write_trace_csv(std::move(records), trace_path);
      outcome.files.push_back(trace_path);
    }

    const Variant* best = nullptr;
    for (const auto& v : variants)
      if (!v.gsm && (!best || final_sum[v.label] < final_sum[best->label])) best = &v;
    if (best) {
      const auto best_path = c.dir / "best.txt";
      const double mean = final_sum[best->label] / config.runs;
      write_text_file(best_path, best->label + " " + format_real(mean) + "\n");
      outcome.files.push_back(best_path);
    }
  }
  return outcome;
}

}  // namespace gsmvi
