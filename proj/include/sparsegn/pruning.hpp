// Correlation pruning of Jacobian columns. Columns whose direction is
// poorly correlated with the current residual make no progress in the
// linearized state and can only act as cancelling corrections, so they are
// removed before the coordinate descent solve ever sees them.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sparsegn/problem.hpp"

namespace sparsegn {

/// |j . r| / (||j|| ||r||), the absolute cosine of the angle between a
/// Jacobian column and the residual. Columns with norm <= zero_floor score 0.
/// A zero residual means the subproblem is already solved; the caller must
/// detect that before asking for correlations.
inline double correlation(const Vector& column, const Vector& residual, double zero_floor = 0.0) {
  const double column_norm = column.norm();
  if (column_norm <= zero_floor || column_norm == 0.0) {
    return 0.0;
  }
  const double residual_norm = residual.norm();
  if (residual_norm == 0.0) {
    throw std::invalid_argument("correlation: residual is zero (subproblem already converged)");
  }
  return std::abs(column.dot(residual)) / (column_norm * residual_norm);
}

struct PruneResult {
  std::vector<int> kept_indices;          // correlation >= threshold, ascending
  Vector correlations;                    // per column; 0 for dropped zero columns
  std::vector<int> dropped_zero_columns;  // norm below 1e-12 * max column norm
};

/// Keeps exactly the columns whose correlation with sub.rhs reaches
/// `threshold`. Columns with norm below 1e-12 times the largest column norm
/// are dropped unconditionally and reported separately (the correlation
/// measure divides by the norm). An empty kept set is legal; the outer loop
/// treats it as a no-progress iteration.
inline PruneResult prune_columns(const LinearSubproblem& sub, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("prune_columns: threshold must lie in [0, 1]");
  }
  if (sub.rhs.norm() == 0.0) {
    throw std::invalid_argument("prune_columns: rhs is zero (subproblem already converged)");
  }
  const Eigen::Index n = sub.jacobian.cols();

  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    max_norm = std::max(max_norm, sub.jacobian.col(i).norm());
  }
  const double zero_floor = 1e-12 * max_norm;

  PruneResult result;
  result.correlations = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sub.jacobian.col(i).norm() < zero_floor || max_norm == 0.0) {
      result.dropped_zero_columns.push_back(static_cast<int>(i));
      continue;
    }
    const double corr = correlation(sub.jacobian.col(i), sub.rhs);
    result.correlations(i) = corr;
    if (corr >= threshold) {
      result.kept_indices.push_back(static_cast<int>(i));
    }
  }
  return result;
}

}  // namespace sparsegn
