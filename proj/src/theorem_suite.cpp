#include "pacset/theorem_suite.hpp"

#include <algorithm>
#include <array>
#include <random>

namespace pacset {

namespace {

std::vector<DetectionUnit> detection_units(const Dataset& world) {
  std::vector<DetectionUnit> out;
  for (std::size_t i = 0; i < world.images.size(); ++i) {
    for (std::size_t j = 0; j < world.images[i].ground_truth.size(); ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<EdgeUnit> edge_units(std::span<const FramePair> pairs) {
  std::vector<EdgeUnit> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto n = true_transitions(pairs[p]).size();
    for (std::size_t j = 0; j < n; ++j) out.push_back({p, j});
  }
  return out;
}

constexpr std::size_t kRows = std::size(kSuiteRows);

struct TrialOutcome {
  std::array<double, kRows> error{};
  bool proposal_infeasible = false;
  bool presence_infeasible = false;
  bool location_infeasible = false;
  bool edge_infeasible = false;
  bool zero_proposal_tau = false;
};

}  // namespace

SuiteData::SuiteData(Dataset world) : world_(std::move(world)) {
  pairs_ = frame_pairs(world_);
  detection_ = FiniteDistribution<DetectionUnit>::uniform(detection_units(world_));
  edge_ = FiniteDistribution<EdgeUnit>::uniform(edge_units(pairs_));

  detection_scores_.reserve(detection_.size());
  for (std::size_t i = 0; i < detection_.size(); ++i) {
    const auto& u = detection_.outcome(i);
    detection_scores_.push_back(true_label_scores(image(u), truth(u)));
    if (!smallest_score_match(truth(u).box, image(u).proposals)) {
      proposal_floor_ += detection_.probability(i);
    }
  }
  std::vector<std::vector<Transition>> transitions;
  for (const auto& p : pairs_) transitions.push_back(true_transitions(p));
  edge_scores_.reserve(edge_.size());
  for (const auto& u : edge_.outcomes()) {
    const auto& tr = transitions[u.pair][u.transition];
    edge_scores_.push_back(edge_score(tr.from, tr.to));
  }
}

SuiteReport theorem_suite(const SuiteData& data, const SuiteConfig& config) {
  require_valid(config.detector.proposal);
  require_valid(config.detector.presence);
  require_valid(config.detector.location);
  require_valid(config.edge);

  const auto& det = data.detection();
  const auto& edge = data.edge();
  const auto& world = data.world();

  auto run = [&](std::size_t trial) {
    std::mt19937_64 engine(derive_seed(config.seed, trial));
    TrialOutcome out;

    std::vector<CalibrationRecord> prp(config.n_detection), prs(config.n_detection), loc(config.n_detection);
    for (std::size_t i = 0; i < config.n_detection; ++i) {
      const auto& s = data.detection_scores()[det.sample_index(engine)];
      prp[i] = {s.proposal};
      prs[i] = {s.presence};
      loc[i] = {s.location};
    }
    auto thresholds = DetectorThresholds::fixed(0.0, 0.0, 0.0, config.detector, config.mode);
    thresholds.proposal = calibrate_threshold(prp, config.detector.proposal);
    thresholds.presence = calibrate_threshold(prs, config.detector.presence);
    thresholds.location = calibrate_threshold(loc, config.detector.location);

    std::vector<CalibrationRecord> edge_records(config.n_edge);
    for (auto& r : edge_records) r = {data.edge_scores()[edge.sample_index(engine)]};
    const auto tau_edge = calibrate_threshold(edge_records, config.edge);

    out.proposal_infeasible = thresholds.proposal.infeasible();
    out.presence_infeasible = thresholds.presence.infeasible();
    out.location_infeasible = thresholds.location.infeasible();
    out.edge_infeasible = tau_edge.infeasible();
    out.zero_proposal_tau = thresholds.proposal.tau == 0.0;

    const auto proposer = Proposer::estimated(thresholds.proposal);
    std::vector<std::vector<Detection>> sets(world.images.size());
    std::vector<char> built(world.images.size(), 0);
    auto set_of = [&](std::size_t image) -> const std::vector<Detection>& {
      if (!built[image]) {
        sets[image] = detection_set(world.images[image], thresholds);
        built[image] = 1;
      }
      return sets[image];
    };

    for (std::size_t i = 0; i < det.size(); ++i) {
      const auto& u = det.outcome(i);
      const auto& image = data.image(u);
      const auto& truth = data.truth(u);
      const double p = det.probability(i);
      out.error[0] += p * loss_prp(image, truth, thresholds.proposal);
      out.error[1] += p * loss_prs(image, truth, thresholds.presence, proposer);
      out.error[2] += p * loss_loc(image, truth, thresholds.location, proposer);
      out.error[3] += p * (contains_detection(set_of(u.image), truth) ? 0.0 : 1.0);
    }

    const auto& pairs = data.pairs();
    const auto rule = EdgeRule::threshold(tau_edge.tau);
    std::vector<std::vector<TransitionOutcome>> by_pair(pairs.size());
    auto index_of = [&](const ImageRecord* image) {
      return static_cast<std::size_t>(image - world.images.data());
    };
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      FrameDetections from{set_of(index_of(pairs[p].frame_t)), {}};
      FrameDetections to{set_of(index_of(pairs[p].frame_t1)), {}};
      by_pair[p] = evaluate_frame_pair(pairs[p], rule, from, to);
    }
    for (std::size_t i = 0; i < edge.size(); ++i) {
      const auto& u = edge.outcome(i);
      const double p = edge.probability(i);
      if (data.edge_scores()[i] < tau_edge.tau) out.error[4] += p;
      if (by_pair[u.pair][u.transition].missed) out.error[5] += p;
    }
    return out;
  };

  const auto outcomes = run_trials<TrialOutcome>(config.trials, config.threads, run);

  const auto& b = config.detector;
  const auto prs_given = compose(as_composed(b.presence), as_composed(b.proposal));
  const auto loc_given = compose(as_composed(b.location), as_composed(b.proposal));
  const auto detection = compose_budgets(b.proposal, b.presence, b.location, config.mode);
  const std::array<ComposedBudget, kRows> bounds{
      as_composed(b.proposal), prs_given, loc_given, detection,
      as_composed(config.edge), composed_edge_budget(detection, as_composed(config.edge))};

  SuiteReport report;
  report.proposal_floor = data.proposal_floor();
  const bool below_floor = b.proposal.epsilon < data.proposal_floor();
  for (std::size_t r = 0; r < kRows; ++r) {
    TheoremRow row;
    row.name = kSuiteRows[r];
    row.bound = bounds[r];
    row.trials = outcomes.size();
    double sum = 0.0;
    for (const auto& o : outcomes) {
      const double e = o.error[r];
      sum += e;
      row.max_true_error = std::max(row.max_true_error, e);
      row.violations += e > row.bound.epsilon ? 1 : 0;
      bool infeasible = false;
      switch (r) {
        case 0: infeasible = o.proposal_infeasible; break;
        case 1: infeasible = o.proposal_infeasible || o.presence_infeasible; break;
        case 2: infeasible = o.proposal_infeasible || o.location_infeasible; break;
        case 3: infeasible = o.proposal_infeasible || o.presence_infeasible || o.location_infeasible; break;
        case 4: infeasible = o.edge_infeasible; break;
        default:
          infeasible = o.proposal_infeasible || o.presence_infeasible || o.location_infeasible ||
                       o.edge_infeasible;
      }
      row.infeasible_trials += infeasible ? 1 : 0;
      row.zero_proposal_tau += (r != 4 && o.zero_proposal_tau) ? 1 : 0;
    }
    if (row.trials > 0) {
      row.fraction = static_cast<double>(row.violations) / static_cast<double>(row.trials);
      row.interval = clopper_pearson(row.violations, row.trials);
      row.mean_true_error = sum / static_cast<double>(row.trials);
    }
    row.below_floor = below_floor && r != 4;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pacset
