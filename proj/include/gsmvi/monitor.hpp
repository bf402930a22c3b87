#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsmvi/gaussian.hpp"

namespace gsmvi {

enum class Metric { fkl_mean, neg_elbo, kl_gauss_exact };

std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

/// One row of a convergence trace.
struct TraceRecord {
  std::string algorithm;
  int run_id = 0;
  std::int64_t iteration = 0;
  /// Cumulative target gradient evaluations; nondecreasing within a run.
  std::int64_t grad_evals = 0;
  Metric metric = Metric::fkl_mean;
  double value = 0.0;
};

/// Metric callback invoked every `every` iterations (and always after the
/// final iteration). The callback may hold its own random stream.
struct Monitor {
  Metric metric = Metric::fkl_mean;
  std::function<double(const GaussianParams&)> evaluate;
  std::int64_t every = 1;

  bool due(std::int64_t iteration, std::int64_t last_iteration) const {
    return iteration % every == 0 || iteration == last_iteration;
  }
};

struct RunResult {
  GaussianParams final_params;
  std::vector<TraceRecord> trace;
  std::int64_t grad_evals = 0;
};

/// A run stopped early. Carries the trace recorded so far.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, std::vector<TraceRecord> trace, std::int64_t iteration)
      : Error(what), trace_(std::move(trace)), iteration_(iteration) {}
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  std::vector<TraceRecord> trace_;
  std::int64_t iteration_;
};

}  // namespace gsmvi
