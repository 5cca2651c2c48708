// Coordinate descent on a pruned linear subproblem. One Jacobian column is
// advanced per inner iteration; the column choice balances correlation with
// residual reduction, and the safeguards (unique-coordinate cap, box limits,
// trust radius, early stopping) keep the partial solution sparse instead of
// driving it to the full least-squares solution.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsegn/problem.hpp"

namespace sparsegn {

enum class ColumnRule {
  Ours,            // argmax of M = 2 r.j - alpha ||j||^2 at the selection step size
  GaussSouthwell,  // argmax of r.j
  Mbi,             // argmax of |j^.r^|, blind to column magnitude
};

/// Step actually taken per inner iteration: the full greedy step
/// r.j / ||j||^2, or a fixed tau clamped to never exceed the greedy step.
struct StepSize {
  enum class Kind { Greedy, Fixed };
  Kind kind = Kind::Greedy;
  double tau = 0.0;

  static StepSize greedy() { return {}; }
  static StepSize fixed(double tau) { return {Kind::Fixed, tau}; }
};

/// Step size used inside the selection score. Decoupled from the step taken
/// so the two can be varied independently.
struct SelectionStep {
  enum class Kind { SameAsTaken, Fixed };
  Kind kind = Kind::SameAsTaken;
  double tau = 0.0;

  static SelectionStep same_as_taken() { return {}; }
  static SelectionStep fixed(double tau) { return {Kind::Fixed, tau}; }
};

struct CdConfig {
  ColumnRule rule = ColumnRule::Ours;
  StepSize step_size = StepSize::greedy();
  SelectionStep selection_step_size = SelectionStep::same_as_taken();
  int max_unique_coordinates = 10;
  double min_rel_decrease = 1e-3;  // 0 disables the stall test
  int max_inner_iterations = 1000;
  std::optional<Vector> parameter_min;  // per-parameter box, either side optional
  std::optional<Vector> parameter_max;
  std::optional<double> trust_radius;

  void validate(Eigen::Index parameter_count) const {
    if (step_size.kind == StepSize::Kind::Fixed && !(step_size.tau > 0.0)) {
      throw std::invalid_argument("CdConfig: fixed step size must be positive");
    }
    if (selection_step_size.kind == SelectionStep::Kind::Fixed &&
        !(selection_step_size.tau > 0.0)) {
      throw std::invalid_argument("CdConfig: fixed selection step size must be positive");
    }
    if (max_unique_coordinates < 1) {
      throw std::invalid_argument("CdConfig: max_unique_coordinates must be positive");
    }
    if (!(min_rel_decrease >= 0.0)) {
      throw std::invalid_argument("CdConfig: min_rel_decrease must be nonnegative");
    }
    if (max_inner_iterations < 1) {
      throw std::invalid_argument("CdConfig: max_inner_iterations must be positive");
    }
    if (parameter_min && parameter_min->size() != parameter_count) {
      throw std::invalid_argument("CdConfig: parameter_min has wrong length");
    }
    if (parameter_max && parameter_max->size() != parameter_count) {
      throw std::invalid_argument("CdConfig: parameter_max has wrong length");
    }
    if (parameter_min && parameter_max &&
        ((*parameter_min).array() > (*parameter_max).array()).any()) {
      throw std::invalid_argument("CdConfig: parameter_min exceeds parameter_max");
    }
    if (trust_radius && !(*trust_radius > 0.0)) {
      throw std::invalid_argument("CdConfig: trust_radius must be positive");
    }
  }
};

enum class StopReason {
  ResidualStall,
  UniqueCoordCap,
  IterationCap,
  TrustRegion,
  Converged,
  EmptyColumnSet,
};

inline const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::ResidualStall: return "residual_stall";
    case StopReason::UniqueCoordCap: return "unique_coord_cap";
    case StopReason::IterationCap: return "iteration_cap";
    case StopReason::TrustRegion: return "trust_region";
    case StopReason::Converged: return "converged";
    case StopReason::EmptyColumnSet: return "empty_column_set";
  }
  return "unknown";
}

struct InnerStep {
  int column = -1;
  double alpha = 0.0;         // magnitude along the oriented column
  int sign = 1;               // orientation applied on write-back
  double residual_norm = 0.0; // after the step
};

struct CdResult {
  Vector delta_x;  // full parameter indexing; unselected coordinates exactly 0
  std::vector<InnerStep> inner_trace;
  StopReason stop_reason = StopReason::IterationCap;
  int unique_coordinates_used = 0;
};

/// Flips `column` so that residual . column >= 0 and returns the sign
/// applied; the sign multiplies alpha on write-back so parameter semantics
/// are preserved. An exactly orthogonal column keeps sign +1.
inline std::pair<Vector, int> orient_column(const Vector& column, const Vector& residual) {
  const int sign = residual.dot(column) < 0.0 ? -1 : 1;
  return {sign < 0 ? Vector(-column) : column, sign};
}

/// alpha = r.j / ||j||^2, the step minimizing ||r - alpha j|| over alpha.
/// Expects the column oriented (r.j >= 0) and nonzero.
inline double greedy_step(const Vector& residual, const Vector& column) {
  const double norm2 = column.squaredNorm();
  if (norm2 == 0.0) {
    throw std::invalid_argument("greedy_step: zero-norm column (should have been pruned)");
  }
  return residual.dot(column) / norm2;
}

/// M = 2 r.j - alpha ||j||^2, which for alpha > 0 equals
/// (||r||^2 - ||r - alpha j||^2) / alpha, the residual reduction per unit
/// step. At alpha = 0 this is the limit 2 r.j; at the greedy alpha it
/// collapses to r.j, the Gauss-Southwell score.
inline double score_column(const Vector& residual, const Vector& column, double alpha) {
  return 2.0 * residual.dot(column) - alpha * column.squaredNorm();
}

namespace detail {

// Effective selection step for one column: the configured selection step,
// clamped so it never exceeds the column's greedy step.
inline double selection_alpha(const CdConfig& config, double greedy) {
  double tau = greedy;
  if (config.selection_step_size.kind == SelectionStep::Kind::Fixed) {
    tau = config.selection_step_size.tau;
  } else if (config.step_size.kind == StepSize::Kind::Fixed) {
    tau = config.step_size.tau;
  }
  return std::min(tau, greedy);
}

}  // namespace detail

/// Picks the next coordinate among `candidates` (ascending index order; ties
/// go to the lowest index). Returns nullopt when no usable candidate exists.
inline std::optional<int> select_column(const Matrix& jacobian, const Vector& residual,
                                        const std::vector<int>& candidates,
                                        const CdConfig& config) {
  const double residual_norm = residual.norm();
  std::optional<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int idx : candidates) {
    const auto column = jacobian.col(idx);
    const double norm2 = column.squaredNorm();
    if (norm2 == 0.0) {
      continue;  // zero columns never qualify
    }
    const double aligned = std::abs(residual.dot(column));  // r.(sign * j)
    double score = 0.0;
    switch (config.rule) {
      case ColumnRule::Mbi:
        score = residual_norm == 0.0 ? 0.0 : aligned / (std::sqrt(norm2) * residual_norm);
        break;
      case ColumnRule::GaussSouthwell:
        score = aligned;
        break;
      case ColumnRule::Ours: {
        const double greedy = aligned / norm2;
        const double alpha = detail::selection_alpha(config, greedy);
        // At the greedy step M collapses to r.j exactly; using the algebraic
        // form keeps the reduction to Gauss-Southwell bit-exact.
        score = alpha == greedy ? aligned : 2.0 * aligned - alpha * norm2;
        break;
      }
    }
    if (score > best_score) {
      best_score = score;
      best = idx;
    }
  }
  return best;
}

/// Coordinate descent for J_S dx_S = rhs restricted to `kept_columns`.
///
/// Per iteration: select a column, take alpha (fixed tau is clamped to the
/// greedy step, then to the box limits around sub.base_point), update
/// r <- r - alpha j. Stops on residual stall, the unique-coordinate cap
/// (the step that would admit one coordinate too many is not taken), the
/// iteration cap, a step that would cross the trust radius (rejected
/// entirely so ||dx_S|| <= trust_radius stays literal), or convergence.
inline CdResult cd_solve(const LinearSubproblem& sub, const std::vector<int>& kept_columns,
                         const CdConfig& config) {
  const Eigen::Index n = sub.jacobian.cols();
  config.validate(n);
  if ((config.parameter_min || config.parameter_max) && sub.base_point.size() != n) {
    throw std::invalid_argument("cd_solve: base_point required when limits are configured");
  }

  CdResult result;
  result.delta_x = Vector::Zero(n);
  if (kept_columns.empty()) {
    result.stop_reason = StopReason::EmptyColumnSet;
    return result;
  }

  Vector r = sub.rhs;
  Vector r_candidate(r.size());
  const double r0_norm = r.norm();
  double r_norm = r0_norm;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  int unique_count = 0;

  result.stop_reason = StopReason::IterationCap;
  for (int iter = 0; iter < config.max_inner_iterations; ++iter) {
    if (r_norm <= 1e-12 * r0_norm) {
      result.stop_reason = StopReason::Converged;
      break;
    }
    const std::optional<int> pick = select_column(sub.jacobian, r, kept_columns, config);
    if (!pick) {
      result.stop_reason = StopReason::EmptyColumnSet;
      break;
    }
    const int col = *pick;
    if (!used[static_cast<std::size_t>(col)] && unique_count == config.max_unique_coordinates) {
      result.stop_reason = StopReason::UniqueCoordCap;
      break;
    }

    const auto column = sub.jacobian.col(col);
    const double norm2 = column.squaredNorm();
    const double raw_dot = r.dot(column);
    const int sign = raw_dot < 0.0 ? -1 : 1;
    const double greedy = std::abs(raw_dot) / norm2;
    double alpha = config.step_size.kind == StepSize::Kind::Greedy
                       ? greedy
                       : std::min(config.step_size.tau, greedy);
    if (!std::isfinite(alpha)) {
      throw std::runtime_error("cd_solve: non-finite step at inner iteration " +
                               std::to_string(iter) + " (column " + std::to_string(col) + ")");
    }

    // Box limits: clamp alpha algebraically so base + delta + sign*alpha
    // stays inside, then clamp the written value so the bound is exact
    // even under rounding.
    const double current = (sub.base_point.size() == n ? sub.base_point(col) : 0.0) +
                           result.delta_x(col);
    if (sign > 0 && config.parameter_max) {
      alpha = std::min(alpha, std::max(0.0, (*config.parameter_max)(col) - current));
    }
    if (sign < 0 && config.parameter_min) {
      alpha = std::min(alpha, std::max(0.0, current - (*config.parameter_min)(col)));
    }
    double new_value = current + sign * alpha;
    if (config.parameter_min) new_value = std::max(new_value, (*config.parameter_min)(col));
    if (config.parameter_max) new_value = std::min(new_value, (*config.parameter_max)(col));
    const double applied = new_value - current;  // signed parameter step
    const double applied_alpha = std::abs(applied);

    if (config.trust_radius) {
      const double old_entry = result.delta_x(col);
      const double new_entry = old_entry + applied;
      const double candidate_sq =
          result.delta_x.squaredNorm() - old_entry * old_entry + new_entry * new_entry;
      if (std::sqrt(std::max(candidate_sq, 0.0)) > *config.trust_radius) {
        result.stop_reason = StopReason::TrustRegion;
        break;
      }
    }

    r_candidate = r - applied * column;
    const double candidate_norm = r_candidate.norm();
    if (!std::isfinite(candidate_norm)) {
      throw std::runtime_error("cd_solve: non-finite residual at inner iteration " +
                               std::to_string(iter) + " (column " + std::to_string(col) + ")");
    }
    if (config.min_rel_decrease > 0.0 &&
        (r_norm - candidate_norm) / r0_norm < config.min_rel_decrease) {
      result.stop_reason = StopReason::ResidualStall;
      break;
    }

    if (!used[static_cast<std::size_t>(col)]) {
      used[static_cast<std::size_t>(col)] = 1;
      ++unique_count;
    }
    result.delta_x(col) += applied;
    r.swap(r_candidate);
    r_norm = candidate_norm;
    result.inner_trace.push_back(InnerStep{col, applied_alpha, sign, r_norm});
  }

  result.unique_coordinates_used = unique_count;
  return result;
}

}  // namespace sparsegn
