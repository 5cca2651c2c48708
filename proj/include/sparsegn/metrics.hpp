// Weight-vector evaluation metrics: L2/L1 error, 1-D earth mover's distance
// between normalized magnitude histograms, the strict zero count, and the
// Gini sparsity index.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsegn/problem.hpp"

namespace sparsegn {

struct WeightErrors {
  double l2 = 0.0;
  double l1 = 0.0;
};

inline WeightErrors weight_errors(const Vector& w, const Vector& w_true) {
  if (w.size() != w_true.size()) {
    throw std::invalid_argument("weight_errors: length mismatch (" + std::to_string(w.size()) +
                                " vs " + std::to_string(w_true.size()) + ")");
  }
  return {(w - w_true).norm(), (w - w_true).lpNorm<1>()};
}

struct EmdResult {
  double value = 0.0;
  bool degenerate = false;  // set when either side has no L1 mass
};

/// 1-D earth mover's distance between |w|/||w||_1 and |w_true|/||w_true||_1
/// viewed as histograms over the indices with ground distance |i - j|:
/// sum_k |CDF_a(k) - CDF_b(k)|. A zero-mass vector against a nonzero one is
/// defined as K (beyond any achievable distance) with the degenerate flag;
/// two zero-mass vectors give 0 with the flag.
inline EmdResult emd_error(const Vector& w, const Vector& w_true) {
  if (w.size() != w_true.size()) {
    throw std::invalid_argument("emd_error: length mismatch");
  }
  const Eigen::Index k = w.size();
  const double mass_a = w.array().abs().sum();
  const double mass_b = w_true.array().abs().sum();
  if (mass_a == 0.0 && mass_b == 0.0) {
    return {0.0, true};
  }
  if (mass_a == 0.0 || mass_b == 0.0) {
    return {static_cast<double>(k), true};
  }
  double cdf_a = 0.0;
  double cdf_b = 0.0;
  double distance = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    cdf_a += std::abs(w(i)) / mass_a;
    cdf_b += std::abs(w_true(i)) / mass_b;
    distance += std::abs(cdf_a - cdf_b);
  }
  return {distance, false};
}

/// Count of entries exactly equal to zero; larger is sparser.
inline int l0_sparsity(const Vector& w) {
  int zeros = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) == 0.0) ++zeros;
  }
  return zeros;
}

struct GiniResult {
  double value = 0.0;
  bool degenerate = false;  // set for the all-zero vector
};

/// Gini sparsity index on the magnitudes, sorted ascending (Hurley-Rickard):
/// 1 - 2 sum_k (c_k / ||c||_1) ((N - k + 0.5) / N). Uniform vectors score 0,
/// one-hot vectors score 1 - 1/N. The all-zero vector is defined as 1
/// (perfectly sparse) with the degenerate flag.
inline GiniResult gini(const Vector& w) {
  const Eigen::Index n = w.size();
  if (n == 0) {
    throw std::invalid_argument("gini: empty vector");
  }
  std::vector<double> magnitudes(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    magnitudes[static_cast<std::size_t>(i)] = std::abs(w(i));
    total += magnitudes[static_cast<std::size_t>(i)];
  }
  if (total == 0.0) {
    return {1.0, true};
  }
  std::sort(magnitudes.begin(), magnitudes.end());
  double sum = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    sum += magnitudes[static_cast<std::size_t>(k - 1)] / total *
           ((static_cast<double>(n) - static_cast<double>(k) + 0.5) / static_cast<double>(n));
  }
  return {1.0 - 2.0 * sum, false};
}

struct WeightReport {
  double l2_error = 0.0;
  double l1_error = 0.0;
  double emd_error = 0.0;
  bool emd_degenerate = false;
  int l0_zeros = 0;
  double gini = 0.0;
  bool gini_degenerate = false;
  int significant_count = 0;  // entries with |w| > 1e-3
};

inline WeightReport weight_report(const Vector& w, const Vector& w_true) {
  WeightReport report;
  const WeightErrors errors = weight_errors(w, w_true);
  report.l2_error = errors.l2;
  report.l1_error = errors.l1;
  const EmdResult emd = emd_error(w, w_true);
  report.emd_error = emd.value;
  report.emd_degenerate = emd.degenerate;
  report.l0_zeros = l0_sparsity(w);
  const GiniResult g = gini(w);
  report.gini = g.value;
  report.gini_degenerate = g.degenerate;
  report.significant_count = static_cast<int>((w.array().abs() > 1e-3).count());
  return report;
}

}  // namespace sparsegn
