#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacset/simulator.hpp"
#include "pacset/tracking.hpp"

namespace pacset {

/// One ground-truth detection of one image.
struct DetectionUnit {
  std::size_t image = 0;
  std::size_t truth = 0;
};

/// One true transition: frame pair index and its position in
/// true_transitions(pair).
struct EdgeUnit {
  std::size_t pair = 0;
  std::size_t transition = 0;
};

/// A generated world viewed as two finite distributions: over (image, true
/// detection) for the detector and over true transitions for the edge set.
/// `pairs` points into `world`, so the object is move-only.
class SuiteData {
 public:
  /// Uniform weights over every unit of the world.
  explicit SuiteData(Dataset world);

  SuiteData(SuiteData&&) = default;
  SuiteData& operator=(SuiteData&&) = default;
  SuiteData(const SuiteData&) = delete;
  SuiteData& operator=(const SuiteData&) = delete;

  const Dataset& world() const noexcept { return world_; }
  const std::vector<FramePair>& pairs() const noexcept { return pairs_; }
  const FiniteDistribution<DetectionUnit>& detection() const noexcept { return detection_; }
  const FiniteDistribution<EdgeUnit>& edge() const noexcept { return edge_; }

  const ImageRecord& image(const DetectionUnit& u) const { return world_.images[u.image]; }
  const Detection& truth(const DetectionUnit& u) const {
    return world_.images[u.image].ground_truth[u.truth].detection;
  }

  /// Component scores of each detection unit, in support order.
  const std::vector<ComponentScores>& detection_scores() const noexcept { return detection_scores_; }
  /// Ground-truth edge score of each edge unit, in support order.
  const std::vector<double>& edge_scores() const noexcept { return edge_scores_; }

  /// Exact probability that a true box is matched by no proposal.
  double proposal_floor() const noexcept { return proposal_floor_; }

 private:
  Dataset world_;
  std::vector<FramePair> pairs_;
  FiniteDistribution<DetectionUnit> detection_;
  FiniteDistribution<EdgeUnit> edge_;
  std::vector<ComponentScores> detection_scores_;
  std::vector<double> edge_scores_;
  double proposal_floor_ = 0.0;
};

struct SuiteConfig {
  DetectorBudgets detector{{0.1, 0.2}, {0.1, 0.2}, {0.1, 0.2}};
  RiskBudget edge{0.1, 0.2};
  CompositionMode mode = CompositionMode::StrictChain;
  std::size_t n_detection = 500;
  std::size_t n_edge = 500;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct TheoremRow {
  std::string name;
  /// The (epsilon, delta) the row is checked against.
  ComposedBudget bound;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double fraction = 0.0;
  Interval interval;
  double mean_true_error = 0.0;
  double max_true_error = 0.0;
  /// Trials where a threshold feeding this row had an infeasible k*.
  std::size_t infeasible_trials = 0;
  /// Trials that ended with tau = 0 on the proposal threshold.
  std::size_t zero_proposal_tau = 0;
  /// The proposal epsilon lies below the unmatched-box floor.
  bool below_floor = false;

  bool holds() const noexcept { return fraction <= bound.delta; }
};

struct SuiteReport {
  std::vector<TheoremRow> rows;
  double proposal_floor = 0.0;
};

/// Row names, in report order.
inline constexpr const char* kSuiteRows[] = {
    "proposal", "presence|proposal", "location|proposal", "detection", "edge|truth", "edge|detection"};

/// Repeats calibrate-then-measure: each trial draws calibration sets from
/// both distributions, calibrates all four thresholds, and computes the exact
/// error of every composed set against its composed budget.
SuiteReport theorem_suite(const SuiteData& data, const SuiteConfig& config);

}  // namespace pacset
