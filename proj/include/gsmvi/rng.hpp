#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace gsmvi {

/// Seeded random stream. All randomness in the library is drawn from an
/// explicitly passed Rng; there is no global generator.
///
/// Standard-normal vectors are filled coordinate 0 first, then 1, ..., d-1.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Stream split used for metric evaluation so that monitoring never consumes
// draws from an optimizer's stream.
inline constexpr std::uint64_t kMetricStreamKey = 0x9E3779B97F4A7C15ULL;

inline Rng metric_stream(std::uint64_t run_seed) { return Rng(run_seed ^ kMetricStreamKey); }

}  // namespace gsmvi
