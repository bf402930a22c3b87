#include "gsmvi/kernels.hpp"

#include <algorithm>
#include <exception>

#include <omp.h>

namespace gsmvi {

namespace {

// Fixed partition, so a column's arithmetic never depends on the thread count.
constexpr Eigen::Index kBlockColumns = 64;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

int parallel_threads() { return omp_get_max_threads(); }

Eigen::VectorXd batch_log_density(const GaussianParams& q, const Eigen::MatrixXd& points, Execution exec) {
  require_dim(q.dim(), points.rows(), "batch_log_density points");
  const Eigen::Index n = points.cols();
  Eigen::VectorXd out(n);

  if (exec == Execution::serial) {
    for (Eigen::Index j = 0; j < n; ++j) out[j] = gaussian_log_density(q, points.col(j));
    return out;
  }

  if (!points.allFinite()) throw NonFiniteValue("batch_log_density: points contain non-finite entries");
  const double offset = q.log_det() + static_cast<double>(q.dim()) * kLog2Pi;
  const Eigen::Index blocks = (n + kBlockColumns - 1) / kBlockColumns;
  const Eigen::MatrixXd& lower = q.chol();
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index start = b * kBlockColumns;
    const Eigen::Index width = std::min(kBlockColumns, n - start);
    Eigen::MatrixXd z = points.middleCols(start, width).colwise() - q.mean();
    lower.triangularView<Eigen::Lower>().solveInPlace(z);
    out.segment(start, width) = -0.5 * (z.colwise().squaredNorm().transpose().array() + offset);
  }
  return out;
}

Eigen::VectorXd batch_target_log_density(const TargetModel& target, const Eigen::MatrixXd& points, Execution exec) {
  require_dim(target.dim(), points.rows(), "batch_target_log_density points");
  const Eigen::Index n = points.cols();
  Eigen::VectorXd out(n);
  if (exec == Execution::serial) {
    for (Eigen::Index j = 0; j < n; ++j) out[j] = target.log_density(points.col(j));
    return out;
  }
  // Exceptions may not cross the parallel region; collect the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    try {
      out[j] = target.log_density(points.col(j));
    } catch (...) {
#pragma omp critical(gsmvi_batch_target_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace gsmvi
