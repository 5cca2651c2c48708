// Outer nonlinear loops: the pruned coordinate-descent Gauss-Newton solver
// and the comparison baselines (Powell dogleg, dogleg with an L2 prior on
// the parameters, BFGS with a Charbonnier/soft-L1 prior).
#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsegn/cd.hpp"
#include "sparsegn/problem.hpp"
#include "sparsegn/pruning.hpp"

namespace sparsegn {

enum class Method { PrunedCd, Dogleg, DoglegL2, BfgsSoftL1 };

inline const char* to_string(Method method) {
  switch (method) {
    case Method::PrunedCd: return "pruned_cd";
    case Method::Dogleg: return "dogleg";
    case Method::DoglegL2: return "dogleg_l2";
    case Method::BfgsSoftL1: return "bfgs_soft_l1";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  if (name == "pruned_cd") return Method::PrunedCd;
  if (name == "dogleg") return Method::Dogleg;
  if (name == "dogleg_l2") return Method::DoglegL2;
  if (name == "bfgs_soft_l1") return Method::BfgsSoftL1;
  throw std::invalid_argument("unknown method: " + name);
}

struct SolverConfig {
  Method method = Method::PrunedCd;
  int max_outer_iterations = 10;  // benchmark protocol: at most 10 Gauss-Newton iterations
  double prune_threshold = 0.3;
  CdConfig cd;
  double l2_lambda = 3600.0;
  double soft_l1_lambda = 3600.0;
  double dogleg_initial_radius = 1.0;
  Vector initial_x;  // empty means zeros

  void validate(Eigen::Index parameter_count) const {
    if (max_outer_iterations < 1) {
      throw std::invalid_argument("SolverConfig: max_outer_iterations must be positive");
    }
    if (!(prune_threshold >= 0.0 && prune_threshold <= 1.0)) {
      throw std::invalid_argument("SolverConfig: prune_threshold must lie in [0, 1]");
    }
    if (!(l2_lambda >= 0.0) || !(soft_l1_lambda >= 0.0)) {
      throw std::invalid_argument("SolverConfig: prior weights must be nonnegative");
    }
    if (!(dogleg_initial_radius > 0.0)) {
      throw std::invalid_argument("SolverConfig: dogleg_initial_radius must be positive");
    }
    if (initial_x.size() != 0 && initial_x.size() != parameter_count) {
      throw std::invalid_argument("SolverConfig: initial_x has " +
                                  std::to_string(initial_x.size()) + " entries, problem declares " +
                                  std::to_string(parameter_count));
    }
    cd.validate(parameter_count);
  }
};

/// State recorded before each outer iteration plus the final state. The
/// inner stop reason and unique-coordinate count are filled in on the record
/// that preceded the iteration they describe.
struct OuterRecord {
  Vector x;
  double residual_norm = 0.0;
  std::optional<StopReason> inner_stop;
  int unique_coordinates = 0;
};

struct SolveTrace {
  std::vector<OuterRecord> iterations;
  Vector final_x;
  double wall_ms = 0.0;
  long residual_evaluations = 0;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline Vector initial_point(const Problem& problem, const SolverConfig& config) {
  return config.initial_x.size() == 0 ? Vector(Vector::Zero(problem.parameter_count))
                                      : config.initial_x;
}

inline Vector checked_evaluate(const Problem& problem, const Vector& x, long& evaluations) {
  ++evaluations;
  Vector f = problem.evaluate(x);
  if (f.size() != problem.residual_count) {
    throw std::invalid_argument("problem.evaluate returned " + std::to_string(f.size()) +
                                " residuals, declared " + std::to_string(problem.residual_count));
  }
  return f;
}

inline Matrix checked_jacobian(const Problem& problem, const Vector& x) {
  Matrix jac = problem.jacobian(x);
  if (jac.rows() != problem.residual_count || jac.cols() != problem.parameter_count) {
    throw std::invalid_argument("problem.jacobian returned " + std::to_string(jac.rows()) + "x" +
                                std::to_string(jac.cols()) + ", declared " +
                                std::to_string(problem.residual_count) + "x" +
                                std::to_string(problem.parameter_count));
  }
  return jac;
}

}  // namespace detail

/// The pruned coordinate-descent Gauss-Newton loop: linearize, prune columns
/// against the current residual, coordinate-descent the pruned system, step.
/// Stops at the iteration budget, on a zero step (empty kept set or an
/// immediate inner stall), or when the residual has effectively vanished.
inline SolveTrace solve_pruned_cd(const Problem& problem, const SolverConfig& config) {
  config.validate(problem.parameter_count);
  detail::Stopwatch watch;
  SolveTrace trace;
  Vector x = detail::initial_point(problem, config);

  Vector f = detail::checked_evaluate(problem, x, trace.residual_evaluations);
  double f_norm = f.norm();
  const double initial_norm = f_norm;
  trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});

  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    if (f_norm <= 1e-12 * initial_norm) {
      break;
    }
    CdResult inner;
    try {
      Matrix jac = detail::checked_jacobian(problem, x);
      LinearSubproblem sub{std::move(jac), -f, x};
      const PruneResult pruned = prune_columns(sub, config.prune_threshold);
      inner = cd_solve(sub, pruned.kept_indices, config.cd);
    } catch (const std::runtime_error& error) {
      throw std::runtime_error("solve_pruned_cd: outer iteration " + std::to_string(outer) +
                               ": " + error.what());
    }
    OuterRecord& record = trace.iterations.back();
    record.inner_stop = inner.stop_reason;
    record.unique_coordinates = inner.unique_coordinates_used;

    if (inner.delta_x.isZero(0.0)) {
      break;  // no-progress linearization; further iterations would repeat it
    }
    x += inner.delta_x;
    // Guards against the last-bit rounding of x + delta; the inner solve
    // already clamped algebraically.
    if (config.cd.parameter_min) x = x.cwiseMax(*config.cd.parameter_min);
    if (config.cd.parameter_max) x = x.cwiseMin(*config.cd.parameter_max);

    f = detail::checked_evaluate(problem, x, trace.residual_evaluations);
    f_norm = f.norm();
    if (!std::isfinite(f_norm)) {
      throw std::runtime_error("solve_pruned_cd: non-finite residual after outer iteration " +
                               std::to_string(outer));
    }
    trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});
  }

  trace.final_x = x;
  trace.wall_ms = watch.elapsed_ms();
  return trace;
}

namespace detail {

// Classical dogleg step for the model 0.5 ||J d + f||^2 (+ ridge term).
// `gauss_newton` is absent when the system is rank-deficient, in which case
// the step falls back to the Cauchy leg alone.
inline Vector dogleg_step(const std::optional<Vector>& gauss_newton, const Vector& cauchy,
                          double radius) {
  if (gauss_newton && gauss_newton->norm() <= radius) {
    return *gauss_newton;
  }
  const double cauchy_norm = cauchy.norm();
  if (cauchy_norm >= radius) {
    return (radius / cauchy_norm) * cauchy;
  }
  if (!gauss_newton) {
    return cauchy;
  }
  const Vector leg = *gauss_newton - cauchy;
  const double a = leg.squaredNorm();
  if (a == 0.0) {
    return cauchy;
  }
  const double b = 2.0 * cauchy.dot(leg);
  const double c = cauchy.squaredNorm() - radius * radius;
  const double beta = (-b + std::sqrt(std::max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a);
  return cauchy + beta * leg;
}

}  // namespace detail

/// Powell dogleg on the Gauss-Newton model. With method DoglegL2 the
/// objective gains l2_lambda * ||x||^2, implemented by augmenting the
/// residual with sqrt(lambda) * x rows; lambda = 0 takes the identical
/// unaugmented code path.
inline SolveTrace solve_dogleg(const Problem& problem, const SolverConfig& config) {
  config.validate(problem.parameter_count);
  detail::Stopwatch watch;
  SolveTrace trace;
  const Eigen::Index n = problem.parameter_count;
  const Eigen::Index m = problem.residual_count;
  const double lambda = config.method == Method::DoglegL2 ? config.l2_lambda : 0.0;
  const double sqrt_lambda = std::sqrt(lambda);

  Vector x = detail::initial_point(problem, config);
  Vector f = detail::checked_evaluate(problem, x, trace.residual_evaluations);
  double f_norm = f.norm();
  const double initial_norm = f_norm;
  double objective = 0.5 * (f.squaredNorm() + lambda * x.squaredNorm());
  trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});

  double radius = config.dogleg_initial_radius;
  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    if (f_norm <= 1e-12 * initial_norm) {
      break;
    }
    const Matrix jac = detail::checked_jacobian(problem, x);
    const Vector gradient = jac.transpose() * f + lambda * x;
    const double gradient_norm = gradient.norm();
    if (gradient_norm <= 1e-14 * std::max(1.0, f_norm)) {
      break;  // stationary for the (possibly ridge-augmented) objective
    }

    std::optional<Vector> gauss_newton;
    if (lambda > 0.0) {
      Matrix augmented(m + n, n);
      augmented.topRows(m) = jac;
      augmented.bottomRows(n) = sqrt_lambda * Matrix::Identity(n, n);
      Vector rhs(m + n);
      rhs.head(m) = -f;
      rhs.tail(n) = -sqrt_lambda * x;
      gauss_newton = augmented.colPivHouseholderQr().solve(rhs);
    } else {
      Eigen::ColPivHouseholderQR<Matrix> qr(jac);
      if (qr.rank() == n) {
        gauss_newton = qr.solve(Vector(-f));
      }
    }

    const double curvature = (jac * gradient).squaredNorm() + lambda * gradient.squaredNorm();
    if (curvature == 0.0) {
      break;
    }
    const Vector cauchy = -(gradient.squaredNorm() / curvature) * gradient;
    const Vector step = detail::dogleg_step(gauss_newton, cauchy, radius);
    const double step_norm = step.norm();
    const double predicted =
        -gradient.dot(step) - 0.5 * ((jac * step).squaredNorm() + lambda * step.squaredNorm());
    if (!(predicted > 0.0)) {
      break;  // model cannot decrease further
    }

    const Vector x_trial = x + step;
    // A trial point outside the model's domain (or with a non-finite
    // residual) counts as infinite cost: the step is rejected and the
    // radius shrinks, the usual trust-region treatment.
    Vector f_trial;
    double trial_objective = std::numeric_limits<double>::infinity();
    try {
      f_trial = detail::checked_evaluate(problem, x_trial, trace.residual_evaluations);
      trial_objective = 0.5 * (f_trial.squaredNorm() + lambda * x_trial.squaredNorm());
      if (!std::isfinite(trial_objective)) {
        trial_objective = std::numeric_limits<double>::infinity();
      }
    } catch (const std::exception&) {
      trial_objective = std::numeric_limits<double>::infinity();
    }
    const double rho = std::isfinite(trial_objective)
                           ? (objective - trial_objective) / predicted
                           : -std::numeric_limits<double>::infinity();
    if (rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75 && step_norm >= 0.99 * radius) {
      radius *= 2.0;
    }
    if (rho > 0.0) {
      x = x_trial;
      f = f_trial;
      f_norm = f.norm();
      objective = trial_objective;
    }
    trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});
    if (radius < 1e-14 || step_norm <= 1e-14 * std::max(1.0, x.norm())) {
      break;
    }
  }

  trace.final_x = x;
  trace.wall_ms = watch.elapsed_ms();
  return trace;
}

/// Charbonnier (soft-L1) prior: sum_i 2 (sqrt(1 + x_i^2) - 1). Flat at the
/// origin, asymptotically linear, so small weights are pushed toward zero
/// without the kink of a true L1 term.
inline double soft_l1_prior(const Vector& x) {
  return 2.0 * ((x.array().square() + 1.0).sqrt() - 1.0).sum();
}

inline Vector soft_l1_prior_gradient(const Vector& x) {
  return 2.0 * (x.array() / (x.array().square() + 1.0).sqrt()).matrix();
}

/// BFGS with Armijo backtracking on ||f(x)||^2 + lambda * soft_l1_prior(x).
/// One trace record per line-search iteration; a failed line search stops
/// the solve with a stall mark on the last record.
inline SolveTrace solve_bfgs_soft_l1(const Problem& problem, const SolverConfig& config) {
  config.validate(problem.parameter_count);
  detail::Stopwatch watch;
  SolveTrace trace;
  const Eigen::Index n = problem.parameter_count;
  const double lambda = config.soft_l1_lambda;

  Vector x = detail::initial_point(problem, config);
  Vector f = detail::checked_evaluate(problem, x, trace.residual_evaluations);
  double f_norm = f.norm();
  const double initial_norm = f_norm;
  double objective = f.squaredNorm() + lambda * soft_l1_prior(x);
  Vector gradient =
      2.0 * detail::checked_jacobian(problem, x).transpose() * f +
      lambda * soft_l1_prior_gradient(x);
  trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});

  Matrix inverse_hessian = Matrix::Identity(n, n);
  constexpr double kArmijoSlope = 1e-4;
  constexpr int kMaxBacktracks = 40;

  for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
    if (f_norm <= 1e-12 * initial_norm) {
      break;
    }
    if (gradient.norm() <= 1e-14 * std::max(1.0, std::abs(objective))) {
      break;
    }
    Vector direction = -(inverse_hessian * gradient);
    double slope = gradient.dot(direction);
    if (!(slope < 0.0)) {
      inverse_hessian = Matrix::Identity(n, n);  // curvature got corrupted; restart
      direction = -gradient;
      slope = gradient.dot(direction);
    }

    double t = 1.0;
    bool accepted = false;
    Vector x_new;
    Vector f_new;
    double objective_new = 0.0;
    for (int backtrack = 0; backtrack < kMaxBacktracks; ++backtrack) {
      x_new = x + t * direction;
      // A candidate outside the model's domain is infinite cost; keep halving.
      try {
        f_new = detail::checked_evaluate(problem, x_new, trace.residual_evaluations);
        objective_new = f_new.squaredNorm() + lambda * soft_l1_prior(x_new);
      } catch (const std::exception&) {
        objective_new = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(objective_new) && objective_new <= objective + kArmijoSlope * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      trace.iterations.back().inner_stop = StopReason::ResidualStall;
      break;
    }

    Vector gradient_new =
        2.0 * detail::checked_jacobian(problem, x_new).transpose() * f_new +
        lambda * soft_l1_prior_gradient(x_new);
    const Vector s = x_new - x;
    const Vector y = gradient_new - gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix identity = Matrix::Identity(n, n);
      inverse_hessian = (identity - rho * s * y.transpose()) * inverse_hessian *
                            (identity - rho * y * s.transpose()) +
                        rho * s * s.transpose();
    }

    x = x_new;
    f = f_new;
    f_norm = f.norm();
    objective = objective_new;
    gradient = gradient_new;
    trace.iterations.push_back(OuterRecord{x, f_norm, std::nullopt, 0});
  }

  trace.final_x = x;
  trace.wall_ms = watch.elapsed_ms();
  return trace;
}

inline SolveTrace solve(const Problem& problem, const SolverConfig& config) {
  switch (config.method) {
    case Method::PrunedCd: return solve_pruned_cd(problem, config);
    case Method::Dogleg:
    case Method::DoglegL2: return solve_dogleg(problem, config);
    case Method::BfgsSoftL1: return solve_bfgs_soft_l1(problem, config);
  }
  throw std::invalid_argument("solve: unknown method");
}

}  // namespace sparsegn
