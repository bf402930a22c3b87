#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gsmvi/config.hpp"
#include "gsmvi/kernels.hpp"
#include "gsmvi/target.hpp"

namespace gsmvi {

/// Builds the model a target spec describes (reads DSL programs from disk).
std::shared_ptr<const TargetModel> build_target(const TargetSpec& spec);

/// One grid point of the 1-D update field. dsigma = sqrt(Sigma_new) - sigma.
struct VectorFieldRow {
  double mu = 0.0;
  double sigma = 0.0;
  double dmu = 0.0;
  double dsigma = 0.0;
};

/// GSM update directions over the (mu, sigma) grid [-2, 2] x [0.2, 3] with
/// `resolution` points per axis, mu-major. Each direction is the average of
/// `samples` single-sample updates. Every grid point has its own stream
/// derived from `seed`, so rows do not depend on the execution mode.
std::vector<VectorFieldRow> gsm_vector_field(const TargetModel& target, int resolution, int samples,
                                             std::uint64_t seed, Execution exec = Execution::parallel);

/// `mu,sigma,dmu,dsigma` CSV with LF endings.
std::string vector_field_csv_text(const std::vector<VectorFieldRow>& rows);

struct ExperimentOutcome {
  std::vector<std::filesystem::path> files;
  /// One message per failed run; outputs of the other runs are still written.
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Runs every case of the experiment and writes its files under
/// config.output_dir. Throws ConfigError for configurations that cannot be
/// realized (for example a metric the target does not support) and Error
/// for IO failures.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

}  // namespace gsmvi
