#include "sparsegn/problem.hpp"

#include <gtest/gtest.h>

#include "sparsegn/synth.hpp"

namespace {

using sparsegn::Matrix;
using sparsegn::Vector;

Matrix section3_matrix() {
  Matrix a(2, 2);
  a << 1.0, -1.0, 0.1, 1e-6;
  return a;
}

TEST(Linearize, LinearProblemAtZeroGivesMatrixAndRhs) {
  const Matrix a = section3_matrix();
  const Vector b = (Vector(2) << 5.0, 1.0).finished();
  const auto problem = sparsegn::make_linear_problem(a, b);
  const auto sub = sparsegn::linearize(problem, Vector::Zero(2));
  EXPECT_EQ(sub.jacobian, a);
  EXPECT_EQ(sub.rhs, b);  // rhs = -(A*0 - b)
  EXPECT_EQ(sub.base_point, Vector::Zero(2));
}

TEST(Linearize, RhsIsNegatedResidualAtAnyPoint) {
  const Matrix a = Matrix::Random(5, 3);
  const Vector b = Vector::Random(5);
  const auto problem = sparsegn::make_linear_problem(a, b);
  const Vector x = Vector::Random(3);
  const auto sub = sparsegn::linearize(problem, x);
  EXPECT_EQ(sub.rhs, Vector(-problem.evaluate(x)));
}

TEST(Linearize, IsPure) {
  const auto problem = sparsegn::make_linear_problem(Matrix::Random(4, 2), Vector::Random(4));
  const Vector x = Vector::Random(2);
  const auto first = sparsegn::linearize(problem, x);
  const auto second = sparsegn::linearize(problem, x);
  EXPECT_EQ(first.jacobian, second.jacobian);
  EXPECT_EQ(first.rhs, second.rhs);
  EXPECT_EQ(first.base_point, second.base_point);
}

TEST(Linearize, ShapeMismatchesIdentifyTheOffendingDimension) {
  sparsegn::Problem bad_evaluate;
  bad_evaluate.parameter_count = 2;
  bad_evaluate.residual_count = 3;
  bad_evaluate.evaluate = [](const Vector&) { return Vector::Zero(4); };
  bad_evaluate.jacobian = [](const Vector&) { return Matrix::Zero(3, 2); };
  try {
    sparsegn::linearize(bad_evaluate, Vector::Zero(2));
    FAIL() << "expected shape error";
  } catch (const std::invalid_argument& error) {
    EXPECT_NE(std::string(error.what()).find("4"), std::string::npos);
    EXPECT_NE(std::string(error.what()).find("3"), std::string::npos);
  }

  sparsegn::Problem bad_jacobian;
  bad_jacobian.parameter_count = 2;
  bad_jacobian.residual_count = 3;
  bad_jacobian.evaluate = [](const Vector&) { return Vector::Zero(3); };
  bad_jacobian.jacobian = [](const Vector&) { return Matrix::Zero(3, 5); };
  EXPECT_THROW(sparsegn::linearize(bad_jacobian, Vector::Zero(2)), std::invalid_argument);

  const auto problem = sparsegn::make_linear_problem(Matrix::Zero(3, 2), Vector::Zero(3));
  EXPECT_THROW(sparsegn::linearize(problem, Vector::Zero(4)), std::invalid_argument);
}

TEST(FiniteDiffJacobian, ExactOnLinearProblems) {
  const Matrix a = section3_matrix();
  const auto problem = sparsegn::make_linear_problem(a, (Vector(2) << 0.0, 1.0).finished());
  const Vector x = (Vector(2) << 0.3, -1.7).finished();
  const Matrix jac = sparsegn::finite_diff_jacobian(problem, x, 1e-5);
  EXPECT_LT((jac - a).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FiniteDiffJacobian, QuadraticComponents) {
  sparsegn::Problem problem;
  problem.parameter_count = 2;
  problem.residual_count = 2;
  problem.evaluate = [](const Vector& x) {
    return Vector((Vector(2) << x(0) * x(0), x(1) * x(1)).finished());
  };
  problem.jacobian = [](const Vector& x) {
    Matrix jac = Matrix::Zero(2, 2);
    jac(0, 0) = 2.0 * x(0);
    jac(1, 1) = 2.0 * x(1);
    return jac;
  };
  const Vector x = (Vector(2) << 1.0, 2.0).finished();
  const Matrix jac = sparsegn::finite_diff_jacobian(problem, x, 1e-5);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 2.0;
  expected(1, 1) = 4.0;
  EXPECT_LT((jac - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FiniteDiffJacobian, RejectsNonPositiveStep) {
  const auto problem = sparsegn::make_linear_problem(Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_THROW(sparsegn::finite_diff_jacobian(problem, Vector::Zero(2), 0.0),
               std::invalid_argument);
  EXPECT_THROW(sparsegn::finite_diff_jacobian(problem, Vector::Zero(2), -1e-6),
               std::invalid_argument);
}

// Analytic Jacobians of every shipped problem family agree with central
// differences at random points.
TEST(FiniteDiffJacobian, MatchesAnalyticJacobiansOnShippedProblems) {
  std::vector<sparsegn::Problem> problems;
  problems.push_back(sparsegn::motivating_system(sparsegn::MotivatingCase::B01).problem());
  problems.push_back(sparsegn::motivating_system(sparsegn::MotivatingCase::B51).problem());
  sparsegn::SceneSpec spec;
  spec.parameter_count = 24;
  spec.curve_count = 2;
  spec.samples_per_curve = 10;
  spec.seed = 7;
  const auto scene = sparsegn::generate_scene(spec);
  problems.push_back(sparsegn::make_curve_problem(scene, sparsegn::target_curve_points(scene)));

  sparsegn::Rng rng(99);
  for (const auto& problem : problems) {
    for (int trial = 0; trial < 5; ++trial) {
      Vector x(problem.parameter_count);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-0.5, 0.5);
      const Matrix analytic = problem.jacobian(x);
      const Matrix numeric = sparsegn::finite_diff_jacobian(problem, x, 1e-5);
      const double relative = (analytic - numeric).norm() / std::max(analytic.norm(), 1e-12);
      EXPECT_LT(relative, 1e-5);
    }
  }
}

}  // namespace
