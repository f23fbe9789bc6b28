#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>

#include "pacset/binomial_tail.hpp"

namespace pacset {

/// Score f(x, y) of one calibration example on its true label. The
/// prediction set C_tau(x) = { y : f(x, y) >= tau } contains the true label
/// exactly when true_score >= tau. A label that was never scored is recorded
/// as 0, which errs for every tau > 0.
struct CalibrationRecord {
  double true_score = 0.0;
};

/// Threshold value that yields the empty prediction set.
inline constexpr double kEmptySetTau = std::numeric_limits<double>::infinity();

/// A prediction-set threshold together with how it was obtained.
struct Threshold {
  double tau = 0.0;
  RiskBudget budget{};
  /// Size of the calibration set; 0 for thresholds that were set by hand.
  std::size_t n_calibration = 0;
  /// Error allowance used during calibration; nullopt when the budget was
  /// infeasible for the calibration size (tau is then the trivial 0).
  std::optional<std::uint64_t> k_star_used;

  bool calibrated() const noexcept { return n_calibration > 0; }
  bool infeasible() const noexcept { return calibrated() && !k_star_used.has_value(); }

  /// A threshold that was not produced by calibration.
  static Threshold fixed(double tau);
};

/// Largest tau whose calibration error count #{i : score_i < tau} is at most
/// k*(n, budget). This is the (k* + 1)-th smallest true score; an infeasible
/// budget yields tau = 0. Records are copied before ordering.
/// Throws std::domain_error for an empty record list, a negative or
/// non-finite score, or an invalid budget.
Threshold calibrate_threshold(std::span<const CalibrationRecord> records,
                              const RiskBudget& budget);

/// Fraction of records with true_score < tau.
double empirical_error(const Threshold& threshold, std::span<const CalibrationRecord> records);

}  // namespace pacset
