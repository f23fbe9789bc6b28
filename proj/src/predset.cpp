#include "pacset/predset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pacset {

Threshold Threshold::fixed(double tau) {
  if (std::isnan(tau) || tau < 0.0) {
    throw std::domain_error("threshold must be a nonnegative value");
  }
  Threshold t;
  t.tau = tau;
  return t;
}

Threshold calibrate_threshold(std::span<const CalibrationRecord> records,
                              const RiskBudget& budget) {
  if (records.empty()) {
    throw std::domain_error("calibrate_threshold requires at least one record");
  }
  require_valid(budget);

  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) {
    if (!std::isfinite(r.true_score) || r.true_score < 0.0) {
      throw std::domain_error("calibration scores must be finite and nonnegative");
    }
    scores.push_back(r.true_score);
  }

  Threshold out;
  out.budget = budget;
  out.n_calibration = scores.size();
  out.k_star_used = k_star(scores.size(), budget);
  if (!out.k_star_used) {
    out.tau = 0.0;
    return out;
  }
  const auto kth = scores.begin() + static_cast<std::ptrdiff_t>(*out.k_star_used);
  std::nth_element(scores.begin(), kth, scores.end());
  out.tau = *kth;
  return out;
}

double empirical_error(const Threshold& threshold, std::span<const CalibrationRecord> records) {
  if (records.empty()) {
    throw std::domain_error("empirical_error requires at least one record");
  }
  const auto errors = std::count_if(records.begin(), records.end(), [&](const CalibrationRecord& r) {
    return r.true_score < threshold.tau;
  });
  return static_cast<double>(errors) / static_cast<double>(records.size());
}

}  // namespace pacset
