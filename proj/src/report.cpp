#include "pacset/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace pacset {

namespace {

// Three decimals; nonzero magnitudes under 0.001 switch to 3 significant
// digits so tiny deltas stay readable.
std::string fixed3(double v) {
  std::ostringstream os;
  if (v != 0.0 && std::isfinite(v) && std::fabs(v) < 1e-3) {
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
  }
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string render(const Cell& cell, bool csv) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* b = std::get_if<bool>(&cell)) return *b ? "yes" : "no";
  const double v = std::get<double>(cell);
  return csv ? exact(v) : fixed3(v);
}

void check_rate(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(what) + " must lie in [0, 1]");
}

void check_afp(double v) {
  if (!(v >= 0.0)) throw std::domain_error("AFP must be nonnegative");
}

}  // namespace

std::string to_text(const Table& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(table.columns);
  for (const auto& row : table.rows) {
    std::vector<std::string> line;
    for (const auto& c : row) line.push_back(render(c, false));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(table.columns.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], line[i].size());
    }
  }
  std::ostringstream os;
  if (!table.title.empty()) os << table.title << "\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) os << "  ";
      os << std::setw(static_cast<int>(width[i])) << cells[r][i];
    }
    os << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total > 2 ? total - 2 : 0, '-') << "\n";
    }
  }
  return os.str();
}

std::string to_csv(const Table& table) {
  std::ostringstream os;
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << render(row[i], true);
    os << "\n";
  }
  return os.str();
}

Table error_bars_report(const DetectorErrors& errors, const DetectorThresholds& thresholds) {
  Table t;
  t.title = "Detection prediction set error";
  t.columns = {"method", "eps", "delta", "measured", "below_budget"};
  auto add = [&](const char* name, const ComposedBudget& budget, double measured) {
    check_rate(measured, "measured error");
    t.rows.push_back({std::string(name), budget.epsilon, budget.delta, measured, measured < budget.epsilon});
  };
  add("proposal", as_composed(thresholds.budgets.proposal), errors.proposal);
  add("presence", thresholds.presence_given_proposal, errors.presence);
  add("location", thresholds.location_given_proposal, errors.location);
  add("detection", thresholds.detection(), errors.detection);
  return t;
}

Table tracking_table(const EdgeThreshold& edge, const EdgeMetrics& edge_metrics,
                     const std::vector<BaselineResult>& baselines) {
  Table t;
  t.title = "Edge prediction set";
  t.columns = {"method", "eps_edge", "delta_edge", "fnr", "afp", "meets_budget"};
  const double eps = edge.budget.epsilon;
  auto add = [&](std::string name, double delta, const EdgeMetrics& m) {
    check_rate(m.fnr, "FNR");
    check_afp(m.afp);
    t.rows.push_back({std::move(name), eps, delta, m.fnr, m.afp, m.fnr <= eps});
  };
  add("edge", edge.budget.delta, edge_metrics);
  for (const auto& b : baselines) add("top-" + std::to_string(b.k), edge.budget.delta, b.metrics);
  return t;
}

Table composed_table(const std::vector<ComposedResult>& rows) {
  Table t;
  t.title = "Composed detection and edge prediction sets";
  t.columns = {"method", "eps_det", "eps_edge", "delta_det", "delta_edge",
               "desired_fnr", "fnr", "afp", "meets_budget"};
  for (const auto& r : rows) {
    check_rate(r.metrics.fnr, "FNR");
    check_afp(r.metrics.afp);
    const auto desired = composed_edge_budget(r.detection, as_composed(r.edge));
    t.rows.push_back({std::string("edge+detection"), r.detection.epsilon, r.edge.epsilon,
                      r.detection.delta, r.edge.delta, desired.epsilon, r.metrics.fnr,
                      r.metrics.afp, r.metrics.fnr <= desired.epsilon});
  }
  return t;
}

Table suite_table(const SuiteReport& report) {
  Table t;
  t.title = "Monte Carlo certification (proposal floor " + fixed3(report.proposal_floor) + ")";
  t.columns = {"method", "eps", "delta", "trials", "violations", "fraction", "ci_low",
               "ci_high", "mean_error", "max_error", "infeasible", "below_floor", "holds"};
  for (const auto& r : report.rows) {
    t.rows.push_back({r.name, r.bound.epsilon, r.bound.delta, std::to_string(r.trials),
                      std::to_string(r.violations), r.fraction, r.interval.lower, r.interval.upper,
                      r.mean_true_error, r.max_true_error, std::to_string(r.infeasible_trials),
                      r.below_floor, r.holds()});
  }
  return t;
}

}  // namespace pacset
