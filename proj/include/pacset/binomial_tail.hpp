#pragma once

#include <cstdint>
#include <optional>

namespace pacset {

/// An (epsilon, delta) pair: with probability at least 1 - delta over the
/// calibration draw, the prediction set errs on at most an epsilon fraction
/// of examples.
struct RiskBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  /// True when 0 < epsilon < 1 and 0 < delta < 1.
  bool valid() const noexcept;

  friend bool operator==(const RiskBudget&, const RiskBudget&) = default;
};

/// Throws std::domain_error unless `budget.valid()`.
void require_valid(const RiskBudget& budget);

/// Binomial CDF F(k; n, p) = P[X <= k] for X ~ Binomial(n, p).
///
/// Terms are accumulated in log space through the ratio recurrence
/// t_{i+1} = t_i * (n - i) / (i + 1) * p / (1 - p), so n in the millions
/// neither overflows C(n, i) nor underflows (1 - p)^n.
/// Throws std::domain_error when k > n or p is outside [0, 1].
double binom_cdf(std::uint64_t k, std::uint64_t n, double p);

/// Largest k with F(k; n, epsilon) <= delta, or nullopt when even k = 0
/// exceeds delta. The result is always < n because F(n; n, epsilon) = 1.
/// Comparison against delta is an exact `<=` on the computed value.
std::optional<std::uint64_t> k_star(std::uint64_t n, const RiskBudget& budget);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
Interval clopper_pearson(std::uint64_t successes, std::uint64_t trials,
                         double confidence = 0.95);

}  // namespace pacset
