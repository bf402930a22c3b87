#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsmvi/bbvi.hpp"
#include "gsmvi/errors.hpp"
#include "gsmvi/monitor.hpp"
#include "gsmvi/targets.hpp"

namespace gsmvi {

/// Bad configuration text or values. `line` is 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0);
  int line() const { return line_; }

 private:
  int line_;
};

enum class Experiment { fit, dims, cond, nongauss, vectorfield };
enum class AlgorithmChoice { gsm, bbvi, both };

/// Parsed `target = ...` value.
///
///   gauss:d=<int>,c=<real>[,seed=<uint>][,mean=zero|draw]
///   sas:d=<int>,c=<real>,s=<real>,t=<real>[,seed=<uint>][,mean=zero|draw]
///   dsl:<path>            (dimension from the `dim` key)
struct TargetSpec {
  enum class Kind { gauss, sas, dsl };
  Kind kind = Kind::gauss;
  SinhArcsinhSpec sas;  // .base is used for gauss as well
  std::filesystem::path dsl_path;
  Eigen::Index dsl_dim = 0;
};

/// Canonical text for a target spec (all fields explicit).
std::string target_spec_text(const TargetSpec& spec);

struct ExperimentConfig {
  Experiment experiment = Experiment::fit;
  AlgorithmChoice algorithm = AlgorithmChoice::both;
  std::optional<TargetSpec> target;
  int runs = 10;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "out";

  /// nullopt selects fkl_mean when the target is normalized and samplable,
  /// neg_elbo otherwise.
  std::optional<Metric> metric;
  std::int64_t monitor_every = 1;
  int reference_samples = 1000;
  std::uint64_t reference_seed = 1;
  int neg_elbo_samples = 16;

  // Defaults for seed/mean fields omitted from target strings, and the
  // target recipe of the sweep experiments.
  std::uint64_t target_seed = 0;
  MeanMode target_mean = MeanMode::standard_normal_draw;

  std::int64_t gsm_iterations = 1000;
  int gsm_batch_size = 2;

  std::int64_t bbvi_iterations = 10000;
  int bbvi_batch_size = 2;
  std::vector<double> bbvi_learning_rates{1e-1, 1e-2, 1e-3};
  double bbvi_beta1 = 0.9;
  double bbvi_beta2 = 0.999;
  double bbvi_adam_epsilon = 1e-8;
  EntropyEstimator bbvi_entropy = EntropyEstimator::analytic;

  /// Initial q = N(init_mean * 1, init_scale^2 I).
  double init_mean = 0.0;
  double init_scale = 1.0;

  std::vector<int> dims_values{2, 4, 8, 16, 32};
  double dims_cond = 1.0;
  std::vector<double> cond_values{1, 10, 100, 1000};
  int cond_dim = 10;
  int nongauss_dim = 10;
  double nongauss_cond = 10.0;
  std::vector<double> nongauss_skews{0.0, 0.5, 1.0, 1.8};
  std::vector<double> nongauss_tails{0.5, 1.0, 1.5};

  int vectorfield_resolution = 21;
  int vectorfield_samples = 5;

  /// OpenMP thread count; 0 keeps the runtime default.
  int threads = 0;

  /// Throws ConfigError on out-of-range values or missing required keys.
  void validate() const;
};

/// Every accepted key, in echo order.
const std::vector<std::string_view>& config_keys();

/// Parses config text. Relative DSL paths resolve against `base_dir`.
/// The result is validated.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config as `key = value` lines that parse back to the same
/// config.
std::string echo_config(const ExperimentConfig& config);

/// Valid key with the smallest edit distance to `key`.
std::string nearest_config_key(std::string_view key);

std::string_view experiment_name(Experiment e);
std::string_view algorithm_name(AlgorithmChoice a);

}  // namespace gsmvi
