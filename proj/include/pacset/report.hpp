#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pacset/detection.hpp"
#include "pacset/theorem_suite.hpp"
#include "pacset/tracking.hpp"

namespace pacset {

using Cell = std::variant<std::string, double, bool>;

/// Fixed-column table. Text output prints reals with 3 decimals (nonzero
/// values under 0.001 in 3-digit scientific form); CSV output
/// prints them with round-trip precision, so CSV values equal the metric
/// outputs bit for bit.
struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

std::string to_text(const Table& table);
std::string to_csv(const Table& table);

/// One row per component (proposal, presence, location, detection) with
/// the budget it is held to and the measured error.
/// Columns: method, eps, delta, measured, below_budget.
Table error_bars_report(const DetectorErrors& errors, const DetectorThresholds& thresholds);

/// A top-k baseline result.
struct BaselineResult {
  std::size_t k = 1;
  EdgeMetrics metrics;
};

/// Calibrated edge row followed by the baselines, each flagged against the
/// edge epsilon. Columns: method, eps_edge, delta_edge, fnr, afp, meets_budget.
Table tracking_table(const EdgeThreshold& edge, const EdgeMetrics& edge_metrics,
                     const std::vector<BaselineResult>& baselines);

/// One composed evaluation for a given (detection, edge) budget pair.
struct ComposedResult {
  ComposedBudget detection;
  RiskBudget edge;
  EdgeMetrics metrics;
};

/// Columns: method, eps_det, eps_edge, delta_det, delta_edge, desired_fnr,
/// fnr, afp, meets_budget. desired_fnr = eps_det + eps_edge.
Table composed_table(const std::vector<ComposedResult>& rows);

/// Columns: method, eps, delta, trials, violations, fraction, ci_low,
/// ci_high, mean_error, max_error, infeasible, below_floor, holds.
Table suite_table(const SuiteReport& report);

}  // namespace pacset
