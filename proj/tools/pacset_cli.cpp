// pacset: calibrate, evaluate and certify PAC prediction sets for detection
// and tracking from line-oriented dumps or synthetic worlds.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pacset/dump_io.hpp"
#include "pacset/report.hpp"
#include "pacset/theorem_suite.hpp"

using namespace pacset;

namespace {

enum Exit : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kParse = 3, kInfeasible = 4, kInternal = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetFlags {
  double eps_prp = 0.03, delta_prp = 1e-5 / 3;
  double eps_prs = 0.01, delta_prs = 1e-5 / 3;
  double eps_loc = 0.06, delta_loc = 1e-5 / 3;
  std::optional<double> total_eps, total_delta;
  std::string split = "paper";
  std::string compose = "shared";

  void add(CLI::App* app) {
    app->add_option("--eps-prp", eps_prp, "proposal epsilon")->capture_default_str();
    app->add_option("--delta-prp", delta_prp, "proposal delta")->capture_default_str();
    app->add_option("--eps-prs", eps_prs, "presence epsilon")->capture_default_str();
    app->add_option("--delta-prs", delta_prs, "presence delta")->capture_default_str();
    app->add_option("--eps-loc", eps_loc, "location epsilon")->capture_default_str();
    app->add_option("--delta-loc", delta_loc, "location delta")->capture_default_str();
    app->add_option("--total-eps", total_eps, "total epsilon, divided by --split");
    app->add_option("--total-delta", total_delta, "total delta, divided by --split");
    app->add_option("--split", split, "paper: eps 0.15/0.05/0.30 of the total, delta in thirds; "
                                      "even: equal parts whose composition equals the total")
        ->check(CLI::IsMember({"paper", "even"}))
        ->capture_default_str();
    app->add_option("--compose", compose, "budget composition")
        ->check(CLI::IsMember({"strict", "shared"}))
        ->capture_default_str();
  }

  CompositionMode mode() const {
    return compose == "strict" ? CompositionMode::StrictChain : CompositionMode::SharedEvent;
  }

  DetectorBudgets budgets() const {
    DetectorBudgets b{{eps_prp, delta_prp}, {eps_prs, delta_prs}, {eps_loc, delta_loc}};
    // Strict-chain counts the proposal share twice.
    const double parts = mode() == CompositionMode::StrictChain ? 4.0 : 3.0;
    if (total_eps) {
      if (split == "paper") {
        b.proposal.epsilon = 0.15 * *total_eps;
        b.presence.epsilon = 0.05 * *total_eps;
        b.location.epsilon = 0.30 * *total_eps;
      } else {
        b.proposal.epsilon = b.presence.epsilon = b.location.epsilon = *total_eps / parts;
      }
    }
    if (total_delta) {
      const double d = split == "paper" ? *total_delta / 3.0 : *total_delta / parts;
      b.proposal.delta = b.presence.delta = b.location.delta = d;
    }
    for (const auto* r : {&b.proposal, &b.presence, &b.location}) {
      if (!r->valid()) throw UsageError("budgets need epsilon and delta in (0, 1)");
    }
    return b;
  }
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

void check_threshold(const char* name, const Threshold& t, bool strict_budget) {
  if (!t.infeasible()) return;
  std::ostringstream os;
  os << name << " budget (eps " << t.budget.epsilon << ", delta " << t.budget.delta
     << ") is infeasible for n = " << t.n_calibration << "; using tau = 0";
  if (strict_budget) throw InfeasibleBudget(os.str());
  std::cerr << "warning: " << os.str() << "\n";
}

Dataset load_dump(const std::string& path, bool lenient) {
  auto parsed = parse_dump_file(path, lenient ? ParseMode::Lenient : ParseMode::Strict);
  if (parsed.dropped.total() > 0) {
    std::cerr << "warning: dropped " << parsed.dropped.presence << " presence, "
              << parsed.dropped.location << " location and " << parsed.dropped.truth
              << " truth records with dangling references\n";
  }
  return std::move(parsed.dataset);
}

WorldConfig world_from(const std::string& config_path, std::optional<std::uint64_t> seed) {
  WorldConfig w = config_path.empty() ? WorldConfig{} : load_world_config(config_path);
  if (seed) w.seed = *seed;
  validate(w);
  return w;
}

std::string render(const Table& table, const std::string& format) {
  return format == "csv" ? to_csv(table) : to_text(table);
}

Anchoring anchoring_from(const std::string& name) {
  return name == "global" ? Anchoring::Global : Anchoring::PerObject;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC prediction sets for object detection and tracking"};
  app.require_subcommand(1);

  std::string input, output, config_path, format = "text", detector_path, edges_path;
  std::string anchoring = "per-object";
  std::optional<std::uint64_t> seed;
  bool lenient = false, strict_budget = false;
  BudgetFlags budget_flags;
  double eps_edge = 0.005, delta_edge = 0.01;
  std::size_t trials = 1000, top_k = 5, n_detection = 500, n_edge = 500;
  unsigned threads = 0;
  std::vector<double> eps_edge_grid{0.01, 0.005, 0.001};
  std::string pairs_half = "all";

  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format, "table format")
        ->check(CLI::IsMember({"text", "csv"}))
        ->capture_default_str();
  };
  auto add_edge_budget = [&](CLI::App* sub) {
    sub->add_option("--eps-edge", eps_edge, "edge epsilon")->capture_default_str();
    sub->add_option("--delta-edge", delta_edge, "edge delta")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic world and write it as a dump");
  simulate->add_option("--config", config_path, "world config (JSON)");
  simulate->add_option("--seed", seed, "overrides the config seed");
  simulate->add_option("--output,-o", output, "dump path (default stdout)");

  auto* cal_det = app.add_subcommand("calibrate-detector", "calibrate proposal, presence and location thresholds");
  cal_det->add_option("--input,-i", input, "dump path")->required();
  cal_det->add_option("--output,-o", output, "threshold file (default stdout)");
  cal_det->add_flag("--lenient", lenient, "drop dangling records instead of failing");
  cal_det->add_flag("--strict-budget", strict_budget, "fail when a budget is infeasible");
  budget_flags.add(cal_det);

  auto* cal_edge = app.add_subcommand("calibrate-edges", "calibrate the edge threshold on true detections");
  cal_edge->add_option("--input,-i", input, "dump path")->required();
  cal_edge->add_option("--output,-o", output, "threshold file (default stdout)");
  cal_edge->add_option("--pairs", pairs_half, "frame pairs used: all, or the first half of each sequence")
      ->check(CLI::IsMember({"all", "first"}))
      ->capture_default_str();
  cal_edge->add_flag("--lenient", lenient, "drop dangling records instead of failing");
  cal_edge->add_flag("--strict-budget", strict_budget, "fail when the budget is infeasible");
  add_edge_budget(cal_edge);

  auto* evaluate = app.add_subcommand("evaluate", "measure errors of calibrated sets on a dump");
  evaluate->add_option("--input,-i", input, "dump path")->required();
  evaluate->add_option("--detector", detector_path, "detector threshold file");
  evaluate->add_option("--edges", edges_path, "edge threshold file");
  evaluate->add_option("--top-k", top_k, "largest top-k baseline (0 for none)")->capture_default_str();
  evaluate->add_option("--pairs", pairs_half, "frame pairs used: all, or the second half of each sequence")
      ->check(CLI::IsMember({"all", "second"}))
      ->capture_default_str();
  evaluate->add_option("--anchoring", anchoring, "false-positive anchoring")
      ->check(CLI::IsMember({"per-object", "global"}))
      ->capture_default_str();
  evaluate->add_option("--output,-o", output, "report path (default stdout)");
  evaluate->add_flag("--lenient", lenient, "drop dangling records instead of failing");
  add_format(evaluate);

  auto* verify = app.add_subcommand("verify-theorems", "Monte Carlo check of every composed guarantee");
  verify->add_option("--config", config_path, "world config (JSON)");
  verify->add_option("--seed", seed, "base seed for the world and the trials");
  verify->add_option("--trials", trials, "calibration draws")->capture_default_str();
  verify->add_option("--n-detection", n_detection, "detection calibration size")->capture_default_str();
  verify->add_option("--n-edge", n_edge, "edge calibration size")->capture_default_str();
  verify->add_option("--threads", threads, "worker threads (0 = hardware)")->capture_default_str();
  verify->add_option("--output,-o", output, "report path (default stdout)");
  budget_flags.add(verify);
  add_edge_budget(verify);
  add_format(verify);

  auto* report = app.add_subcommand("report", "component and composed tracking tables over an edge budget grid");
  report->add_option("--input,-i", input, "dump path")->required();
  report->add_option("--detector", detector_path, "detector threshold file")->required();
  report->add_option("--eps-edge-grid", eps_edge_grid, "edge epsilons")->capture_default_str();
  report->add_option("--delta-edge", delta_edge, "edge delta")->capture_default_str();
  report->add_option("--top-k", top_k, "largest top-k baseline (0 for none)")->capture_default_str();
  report->add_option("--anchoring", anchoring, "false-positive anchoring")
      ->check(CLI::IsMember({"per-object", "global"}))
      ->capture_default_str();
  report->add_option("--output,-o", output, "report path (default stdout)");
  report->add_flag("--lenient", lenient, "drop dangling records instead of failing");
  add_format(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) {
      emit(output, serialize_dump(gen_world(world_from(config_path, seed))));
      return kOk;
    }

    if (*cal_det) {
      const auto budgets = budget_flags.budgets();
      const auto data = load_dump(input, lenient);
      const auto t = calibrate_detector(data.images, budgets, budget_flags.mode());
      check_threshold("proposal", t.proposal, strict_budget);
      check_threshold("presence", t.presence, strict_budget);
      check_threshold("location", t.location, strict_budget);
      if (t.detection().degenerate()) std::cerr << "warning: composed detection budget is vacuous\n";
      if (t.proposal_error_floor > budgets.proposal.epsilon) {
        std::cerr << "warning: " << t.proposal_error_floor
                  << " of true boxes have no proposal, above the proposal epsilon\n";
      }
      emit(output, detector_thresholds_to_json(t));
      return kOk;
    }

    if (*cal_edge) {
      const RiskBudget budget{eps_edge, delta_edge};
      if (!budget.valid()) throw UsageError("edge budget needs epsilon and delta in (0, 1)");
      const auto data = load_dump(input, lenient);
      const auto pairs = frame_pairs(data);
      const auto used = pairs_half == "first" ? split_halves(pairs).first : pairs;
      const auto t = calibrate_edges(used, budget);
      check_threshold("edge", t.tau, strict_budget);
      emit(output, edge_threshold_to_json(t));
      return kOk;
    }

    if (*evaluate) {
      if (detector_path.empty() && edges_path.empty()) throw UsageError("give --detector and/or --edges");
      const auto data = load_dump(input, lenient);
      std::string text;
      std::optional<DetectorThresholds> det;
      if (!detector_path.empty()) {
        det = detector_thresholds_from_json(read_text_file(detector_path));
        text += render(error_bars_report(evaluate_detector(data.images, *det), *det), format);
      }
      if (!edges_path.empty()) {
        const auto edge = edge_threshold_from_json(read_text_file(edges_path));
        const auto all = frame_pairs(data);
        const auto pairs = pairs_half == "second" ? split_halves(all).second : all;
        const auto anchor = anchoring_from(anchoring);
        const auto gt = DetectionProvider::ground_truth();
        const auto m = evaluate_edges(pairs, EdgeRule::threshold(edge.tau.tau), gt, anchor);
        std::vector<BaselineResult> baselines;
        for (std::size_t k = 1; k <= top_k; ++k) baselines.push_back({k, topk_baseline(pairs, k, gt, anchor)});
        if (!text.empty()) text += "\n";
        text += render(tracking_table(edge, m, baselines), format);
        if (det) {
          const auto composed = evaluate_edges(pairs, EdgeRule::threshold(edge.tau.tau),
                                               DetectionProvider::estimated(*det), anchor);
          text += "\n" + render(composed_table({{det->detection(), edge.budget, composed}}), format);
        }
      }
      emit(output, text);
      return kOk;
    }

    if (*verify) {
      const RiskBudget edge_budget{eps_edge, delta_edge};
      if (!edge_budget.valid()) throw UsageError("edge budget needs epsilon and delta in (0, 1)");
      SuiteConfig sc;
      sc.detector = budget_flags.budgets();
      sc.edge = edge_budget;
      sc.mode = budget_flags.mode();
      sc.trials = trials;
      sc.n_detection = n_detection;
      sc.n_edge = n_edge;
      sc.threads = threads;
      sc.seed = seed.value_or(0);
      const SuiteData data(gen_world(world_from(config_path, seed)));
      const auto rep = theorem_suite(data, sc);
      emit(output, render(suite_table(rep), format));
      for (const auto& row : rep.rows) {
        if (!row.holds()) return kVerifyFailed;
      }
      return kOk;
    }

    if (*report) {
      const auto data = load_dump(input, lenient);
      const auto det = detector_thresholds_from_json(read_text_file(detector_path));
      const auto split = split_halves(frame_pairs(data));
      const auto anchor = anchoring_from(anchoring);
      const auto gt = DetectionProvider::ground_truth();
      const auto estimated = DetectionProvider::estimated(det);
      std::vector<ComposedResult> rows;
      std::string text;
      for (std::size_t i = 0; i < eps_edge_grid.size(); ++i) {
        const RiskBudget budget{eps_edge_grid[i], delta_edge};
        if (!budget.valid()) throw UsageError("edge budget needs epsilon and delta in (0, 1)");
        const auto edge = calibrate_edges(split.first, budget);
        check_threshold("edge", edge.tau, false);
        if (i == 0) {
          const auto m = evaluate_edges(split.second, EdgeRule::threshold(edge.tau.tau), gt, anchor);
          std::vector<BaselineResult> baselines;
          for (std::size_t k = 1; k <= top_k; ++k) {
            baselines.push_back({k, topk_baseline(split.second, k, gt, anchor)});
          }
          text += render(tracking_table(edge, m, baselines), format) + "\n";
        }
        rows.push_back({det.detection(), budget,
                        evaluate_edges(split.second, EdgeRule::threshold(edge.tau.tau), estimated, anchor)});
      }
      text += render(composed_table(rows), format);
      emit(output, text);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const InfeasibleBudget& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
