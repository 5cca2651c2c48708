#include "sparsegn/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "sparsegn/rng.hpp"

namespace {

using sparsegn::Vector;

Vector from_list(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double value : values) v(i++) = value;
  return v;
}

TEST(WeightErrors, Examples) {
  const Vector w = from_list({1.0, 2.0, 3.0});
  const auto zero = sparsegn::weight_errors(w, w);
  EXPECT_DOUBLE_EQ(zero.l2, 0.0);
  EXPECT_DOUBLE_EQ(zero.l1, 0.0);

  Vector perturbed = w;
  perturbed(0) += 1.0;
  const auto unit = sparsegn::weight_errors(perturbed, w);
  EXPECT_DOUBLE_EQ(unit.l2, 1.0);
  EXPECT_DOUBLE_EQ(unit.l1, 1.0);

  const auto hand = sparsegn::weight_errors(from_list({2.0, 0.0}), from_list({1.0, 1.0}));
  EXPECT_DOUBLE_EQ(hand.l2, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(hand.l1, 2.0);
}

TEST(WeightErrors, LengthMismatchThrows) {
  EXPECT_THROW(sparsegn::weight_errors(Vector::Zero(2), Vector::Zero(3)), std::invalid_argument);
}

TEST(EmdError, IdenticalVectorsGiveZero) {
  const Vector w = from_list({0.2, 0.0, 0.8});
  const auto result = sparsegn::emd_error(w, w);
  EXPECT_DOUBLE_EQ(result.value, 0.0);
  EXPECT_FALSE(result.degenerate);
}

TEST(EmdError, UnitMassShiftCostsTheIndexDistance) {
  const auto result =
      sparsegn::emd_error(from_list({1.0, 0.0, 0.0, 0.0}), from_list({0.0, 0.0, 0.0, 1.0}));
  EXPECT_DOUBLE_EQ(result.value, 3.0);
  EXPECT_DOUBLE_EQ(result.value,
                   oracles::emd_by_transport({1, 0, 0, 0}, {0, 0, 0, 1}));
}

TEST(EmdError, HalfHalfExample) {
  const auto result =
      sparsegn::emd_error(from_list({0.5, 0.5, 0.0}), from_list({0.0, 0.5, 0.5}));
  EXPECT_DOUBLE_EQ(result.value, 1.0);
  EXPECT_DOUBLE_EQ(result.value, oracles::emd_by_transport({1, 1, 0}, {0, 1, 1}));
}

TEST(EmdError, ZeroMassFlags) {
  const auto one_sided = sparsegn::emd_error(Vector::Zero(5), from_list({0, 0, 1, 0, 0}));
  EXPECT_TRUE(one_sided.degenerate);
  EXPECT_DOUBLE_EQ(one_sided.value, 5.0);

  const auto both = sparsegn::emd_error(Vector::Zero(4), Vector::Zero(4));
  EXPECT_TRUE(both.degenerate);
  EXPECT_DOUBLE_EQ(both.value, 0.0);
}

TEST(EmdError, UsesMagnitudesOfSignedWeights) {
  const auto signed_result = sparsegn::emd_error(from_list({-1.0, 0.0}), from_list({1.0, 0.0}));
  EXPECT_DOUBLE_EQ(signed_result.value, 0.0);
}

TEST(EmdError, MatchesTransportOracleOnRandomHistograms) {
  sparsegn::Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + rng.uniform_int(5);  // up to 6 bins
    std::vector<std::int64_t> a(static_cast<std::size_t>(k));
    std::vector<std::int64_t> b(static_cast<std::size_t>(k));
    std::int64_t total_a = 0;
    std::int64_t total_b = 0;
    for (int i = 0; i < k; ++i) {
      a[static_cast<std::size_t>(i)] = rng.uniform_int(10);
      b[static_cast<std::size_t>(i)] = rng.uniform_int(10);
      total_a += a[static_cast<std::size_t>(i)];
      total_b += b[static_cast<std::size_t>(i)];
    }
    if (total_a == 0 || total_b == 0) continue;
    Vector wa(k), wb(k);
    for (int i = 0; i < k; ++i) {
      wa(i) = static_cast<double>(a[static_cast<std::size_t>(i)]);
      wb(i) = static_cast<double>(b[static_cast<std::size_t>(i)]);
    }
    const double expected = oracles::emd_by_transport(a, b);
    EXPECT_NEAR(sparsegn::emd_error(wa, wb).value, expected, 1e-12);
  }
}

TEST(EmdError, IsAMetricOnNormalizedHistograms) {
  sparsegn::Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + rng.uniform_int(5);
    Vector a(k), b(k), c(k);
    for (int i = 0; i < k; ++i) {
      a(i) = static_cast<double>(rng.uniform_int(8));
      b(i) = static_cast<double>(rng.uniform_int(8));
      c(i) = static_cast<double>(rng.uniform_int(8));
    }
    if (a.sum() == 0 || b.sum() == 0 || c.sum() == 0) continue;
    const double ab = sparsegn::emd_error(a, b).value;
    const double ba = sparsegn::emd_error(b, a).value;
    const double ac = sparsegn::emd_error(a, c).value;
    const double cb = sparsegn::emd_error(c, b).value;
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(ab, ac + cb + 1e-12);
  }
}

TEST(L0Sparsity, Examples) {
  EXPECT_EQ(sparsegn::l0_sparsity(Vector::Zero(5)), 5);
  EXPECT_EQ(sparsegn::l0_sparsity(from_list({0.0, 1e-9, 1.0})), 1);  // strictness
  Vector two_hot = Vector::Zero(150);
  two_hot(10) = 1.0;
  two_hot(90) = 1.0;
  EXPECT_EQ(sparsegn::l0_sparsity(two_hot), 148);
}

TEST(Gini, UniformVectorsScoreZero) {
  for (int n : {2, 10, 150}) {
    const auto result = sparsegn::gini(Vector::Constant(n, 0.37));
    EXPECT_NEAR(result.value, 0.0, 1e-12);
    EXPECT_FALSE(result.degenerate);
  }
}

TEST(Gini, OneHotVectorsScoreOneMinusOneOverN) {
  for (int n : {2, 10, 150}) {
    Vector one_hot = Vector::Zero(n);
    one_hot(n / 2) = 2.5;
    EXPECT_NEAR(sparsegn::gini(one_hot).value, 1.0 - 1.0 / n, 1e-12);
  }
}

// (1, 1, 0, 0): sorted magnitudes (0, 0, 1, 1) give
// 1 - 2 [0.5 * 1.5/4 + 0.5 * 0.5/4] = 0.5.
TEST(Gini, HandExample) {
  EXPECT_NEAR(sparsegn::gini(from_list({1.0, 1.0, 0.0, 0.0})).value, 0.5, 1e-15);
}

TEST(Gini, AllZeroIsDegeneratelySparse) {
  const auto result = sparsegn::gini(Vector::Zero(7));
  EXPECT_DOUBLE_EQ(result.value, 1.0);
  EXPECT_TRUE(result.degenerate);
}

TEST(Gini, ScaleInvariant) {
  sparsegn::Rng rng(17);
  Vector w(20);
  for (Eigen::Index i = 0; i < 20; ++i) w(i) = rng.uniform(-1.0, 1.0);
  const double base = sparsegn::gini(w).value;
  for (double scale : {2.0, -5.0, 1e-7, 1e9}) {
    EXPECT_NEAR(sparsegn::gini(Vector(scale * w)).value, base, 1e-12);
  }
}

TEST(Gini, PermutationInvariant) {
  const Vector w = from_list({0.1, 0.0, 2.0, -0.4, 0.7});
  const Vector shuffled = from_list({2.0, 0.7, 0.1, 0.0, -0.4});
  EXPECT_DOUBLE_EQ(sparsegn::gini(w).value, sparsegn::gini(shuffled).value);
}

// The ascending-sort convention is not the same as descending; the
// descending variant would even go negative on one-hot vectors.
TEST(Gini, AscendingSortConventionMatters) {
  const Vector w = from_list({1.0, 2.0, 3.0, 4.0});
  std::vector<double> descending = {4.0, 3.0, 2.0, 1.0};
  double descending_sum = 0.0;
  for (std::size_t k = 1; k <= descending.size(); ++k) {
    descending_sum += descending[k - 1] / 10.0 * ((4.0 - k + 0.5) / 4.0);
  }
  const double descending_value = 1.0 - 2.0 * descending_sum;
  EXPECT_NE(sparsegn::gini(w).value, descending_value);
  EXPECT_GT(sparsegn::gini(w).value, 0.0);
}

TEST(WeightReport, CollectsAllMetrics) {
  Vector w_true = Vector::Zero(6);
  w_true(1) = 1.0;
  w_true(4) = 1.0;
  Vector w = w_true;
  w(0) = 0.5;
  w(2) = 1e-3;  // exactly the significance threshold: not counted (strict >)
  const auto report = sparsegn::weight_report(w, w_true);
  EXPECT_DOUBLE_EQ(report.l2_error, std::sqrt(0.25 + 1e-6));
  EXPECT_DOUBLE_EQ(report.l1_error, 0.5 + 1e-3);
  EXPECT_EQ(report.l0_zeros, 2);
  EXPECT_EQ(report.significant_count, 3);
  EXPECT_FALSE(report.emd_degenerate);
  EXPECT_FALSE(report.gini_degenerate);
  EXPECT_GT(report.gini, 0.0);
}

}  // namespace
