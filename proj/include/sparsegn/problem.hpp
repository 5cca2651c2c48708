// Nonlinear least-squares problem abstraction and its Gauss-Newton
// linearization. Every solver in this library consumes problems through
// these two types only.
#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace sparsegn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;  // dense, column-major; downstream code walks columns

/// A nonlinear least-squares problem min_x ||f(x)||^2 with an analytic
/// Jacobian.
///
/// `evaluate` maps a parameter vector of length `parameter_count` to the
/// residual f(x) of length `residual_count`; `jacobian` returns df/dx at x
/// as a residual_count x parameter_count matrix. Both callbacks must be
/// pure: a single solve is sequential, but distinct parameter vectors may
/// be evaluated from different threads concurrently.
struct Problem {
  Eigen::Index parameter_count = 0;
  Eigen::Index residual_count = 0;
  std::function<Vector(const Vector&)> evaluate;
  std::function<Matrix(const Vector&)> jacobian;
};

/// One Gauss-Newton linearization J dx = rhs taken at base_point, with
/// rhs = -f(base_point).
struct LinearSubproblem {
  Matrix jacobian;
  Vector rhs;
  Vector base_point;
};

inline LinearSubproblem linearize(const Problem& problem, const Vector& x) {
  if (x.size() != problem.parameter_count) {
    throw std::invalid_argument("linearize: parameter vector has " + std::to_string(x.size()) +
                                " entries, problem declares " +
                                std::to_string(problem.parameter_count));
  }
  Vector residual = problem.evaluate(x);
  if (residual.size() != problem.residual_count) {
    throw std::invalid_argument("linearize: evaluate returned " + std::to_string(residual.size()) +
                                " residuals, problem declares " +
                                std::to_string(problem.residual_count));
  }
  Matrix jac = problem.jacobian(x);
  if (jac.rows() != problem.residual_count || jac.cols() != problem.parameter_count) {
    throw std::invalid_argument("linearize: jacobian is " + std::to_string(jac.rows()) + "x" +
                                std::to_string(jac.cols()) + ", expected " +
                                std::to_string(problem.residual_count) + "x" +
                                std::to_string(problem.parameter_count));
  }
  return LinearSubproblem{std::move(jac), -residual, x};
}

/// Central-difference Jacobian, (f(x + h e_i) - f(x - h e_i)) / (2h) column
/// by column. This is the oracle the test suite checks analytic Jacobians
/// against; solvers never call it.
inline Matrix finite_diff_jacobian(const Problem& problem, const Vector& x, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_diff_jacobian: step must be positive");
  }
  if (x.size() != problem.parameter_count) {
    throw std::invalid_argument("finite_diff_jacobian: parameter vector has " +
                                std::to_string(x.size()) + " entries, problem declares " +
                                std::to_string(problem.parameter_count));
  }
  Matrix jac(problem.residual_count, problem.parameter_count);
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index i = 0; i < problem.parameter_count; ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    jac.col(i) = (problem.evaluate(xp) - problem.evaluate(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return jac;
}

/// Wraps f(x) = A x - b as a Problem; the Jacobian is A itself.
inline Problem make_linear_problem(Matrix a, Vector b) {
  if (a.rows() != b.size()) {
    throw std::invalid_argument("make_linear_problem: A has " + std::to_string(a.rows()) +
                                " rows but b has " + std::to_string(b.size()) + " entries");
  }
  auto data = std::make_shared<const std::pair<Matrix, Vector>>(std::move(a), std::move(b));
  Problem problem;
  problem.parameter_count = data->first.cols();
  problem.residual_count = data->first.rows();
  problem.evaluate = [data](const Vector& x) -> Vector { return data->first * x - data->second; };
  problem.jacobian = [data](const Vector&) -> Matrix { return data->first; };
  return problem;
}

}  // namespace sparsegn
