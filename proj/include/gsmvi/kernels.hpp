#pragma once

#include <Eigen/Core>

#include "gsmvi/gaussian.hpp"
#include "gsmvi/target.hpp"

namespace gsmvi {

/// serial is the reference path kept for testing; parallel splits the work
/// over OpenMP threads. Both produce results that do not depend on the
/// thread count.
enum class Execution { serial, parallel };

/// Number of OpenMP threads a parallel kernel would use.
int parallel_threads();

/// log q(x_j) for every column x_j of `points`.
///
/// The serial path calls gaussian_log_density column by column. The parallel
/// path whitens fixed-size column blocks with one triangular solve each; it
/// agrees with the serial path to rounding and does not depend on the thread
/// count.
Eigen::VectorXd batch_log_density(const GaussianParams& q, const Eigen::MatrixXd& points,
                                  Execution exec = Execution::parallel);

/// target.log_density at every column of `points`. Bitwise identical across
/// execution modes.
///
/// See target_log_densities in metrics.hpp for the Gaussian fast path.
Eigen::VectorXd batch_target_log_density(const TargetModel& target, const Eigen::MatrixXd& points,
                                         Execution exec = Execution::parallel);

}  // namespace gsmvi
