#include "pacset/binomial_tail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pacset {

namespace {

// Streams F(0), F(1), ... for fixed (n, p) with 0 < p < 1. The running sum
// is kept as exp(log_max_) * scaled_sum_ so that neither the leading term
// nor the binomial coefficients leave the representable range. Work is done
// in long double and rounded once, so exact values such as F = 1/2 come out
// exact.
class CdfAccumulator {
 public:
  using Real = long double;

  CdfAccumulator(std::uint64_t n, double p)
      : n_(n), log_ratio_(std::log(Real(p)) - std::log1p(-Real(p))),
        log_term_(static_cast<Real>(n) * std::log1p(-Real(p))),
        log_max_(log_term_) {}

  double value() const {
    if (scaled_sum_ <= 0.0L) return 0.0;
    return static_cast<double>(std::min(Real(1), std::exp(log_max_ + std::log(scaled_sum_))));
  }

  // Adds term i + 1, where i is the index of the last added term.
  void advance() {
    const Real i = static_cast<Real>(index_);
    log_term_ += std::log((static_cast<Real>(n_) - i) / (i + 1)) + log_ratio_;
    ++index_;
    if (log_term_ > log_max_) {
      scaled_sum_ = scaled_sum_ * std::exp(log_max_ - log_term_) + 1;
      log_max_ = log_term_;
    } else {
      scaled_sum_ += std::exp(log_term_ - log_max_);
    }
  }

  std::uint64_t index() const { return index_; }

 private:
  std::uint64_t n_;
  Real log_ratio_;
  Real log_term_;
  Real log_max_;
  Real scaled_sum_ = 1;
  std::uint64_t index_ = 0;
};

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("binomial probability outside [0, 1]: " + std::to_string(p));
  }
}

}  // namespace

bool RiskBudget::valid() const noexcept {
  return epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0;
}

void require_valid(const RiskBudget& budget) {
  if (!budget.valid()) {
    throw std::domain_error("risk budget requires 0 < epsilon < 1 and 0 < delta < 1, got (" +
                            std::to_string(budget.epsilon) + ", " +
                            std::to_string(budget.delta) + ")");
  }
}

double binom_cdf(std::uint64_t k, std::uint64_t n, double p) {
  check_probability(p);
  if (k > n) {
    throw std::domain_error("binom_cdf requires k <= n");
  }
  if (k == n || p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;

  CdfAccumulator acc(n, p);
  while (acc.index() < k) acc.advance();
  return acc.value();
}

std::optional<std::uint64_t> k_star(std::uint64_t n, const RiskBudget& budget) {
  require_valid(budget);
  if (n == 0) {
    throw std::domain_error("k_star requires n >= 1");
  }
  // The scan visits F(0), F(1), ... in order, so each value is bit-identical
  // to what binom_cdf returns for the same k.
  CdfAccumulator acc(n, budget.epsilon);
  if (acc.value() > budget.delta) return std::nullopt;
  while (acc.index() + 1 < n) {
    acc.advance();
    if (acc.value() > budget.delta) return acc.index() - 1;
  }
  return n - 1;
}

Interval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence) {
  if (trials == 0 || successes > trials) {
    throw std::domain_error("clopper_pearson requires 0 <= successes <= trials, trials >= 1");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::domain_error("confidence must lie in (0, 1)");
  }
  const double tail = (1.0 - confidence) / 2.0;

  // Both bounds solve a monotone equation in p; 100 bisection steps reach
  // the resolution of a double on [0, 1].
  auto bisect = [](auto&& too_low) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (too_low(mid)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  Interval out;
  if (successes > 0) {
    // P[X >= s | p] = 1 - F(s - 1; n, p) grows with p.
    out.lower = bisect([&](double p) { return 1.0 - binom_cdf(successes - 1, trials, p) < tail; });
  }
  if (successes < trials) {
    // F(s; n, p) shrinks with p.
    out.upper = bisect([&](double p) { return binom_cdf(successes, trials, p) > tail; });
  }
  return out;
}

}  // namespace pacset
