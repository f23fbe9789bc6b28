#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacset/binomial_tail.hpp"
#include "pacset/geometry.hpp"
#include "pacset/predset.hpp"

namespace pacset {

/// One detection label y = (box, class, presence flag).
struct Detection {
  BoundingBox box;
  int class_label = 0;
  bool present = true;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// A ground-truth detection; object_id is set for sequence data.
struct GroundTruth {
  Detection detection;
  std::optional<std::int64_t> object_id;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ProposalClass {
  std::size_t proposal = 0;
  int class_label = 0;

  friend auto operator<=>(const ProposalClass&, const ProposalClass&) = default;
};

/// Detector output and ground truth for one image. A (proposal, class) key
/// missing from presence_scores was suppressed and is read as score 0. A
/// missing location key is an empty candidate list.
struct ImageRecord {
  std::string image_id;
  std::string sequence_id;
  std::optional<std::int64_t> frame_index;
  std::vector<ScoredBox> proposals;
  std::map<ProposalClass, double> presence_scores;
  std::map<ProposalClass, std::vector<ScoredBox>> location_candidates;
  std::vector<GroundTruth> ground_truth;

  std::optional<double> presence_score(std::size_t proposal, int class_label) const;
  std::span<const ScoredBox> candidates(std::size_t proposal, int class_label) const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Dataset {
  int num_classes = 1;
  std::vector<ImageRecord> images;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Checks score ranges, proposal references, and class membership in
/// [0, num_classes). Throws std::domain_error naming the image.
void validate(const ImageRecord& image, int num_classes);
void validate(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Budget algebra

/// Union-bound composition result. Components may be 0 here; a composed
/// value >= 1 makes the guarantee vacuous.
struct ComposedBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  bool degenerate() const noexcept { return epsilon >= 1.0 || delta >= 1.0; }
};

enum class CompositionMode {
  /// Presence and location each absorb the proposal budget, then the
  /// detection budget adds both; the proposal budget is counted twice.
  StrictChain,
  /// One union bound over the three calibration events.
  SharedEvent,
};

/// (eps_a + eps_b, delta_a + delta_b). Throws std::domain_error on a
/// negative or NaN component.
ComposedBudget compose(const ComposedBudget& a, const ComposedBudget& b);
ComposedBudget as_composed(const RiskBudget& budget);

ComposedBudget compose_budgets(const RiskBudget& proposal, const RiskBudget& presence,
                               const RiskBudget& location, CompositionMode mode);

struct DetectorBudgets {
  RiskBudget proposal;
  RiskBudget presence;
  RiskBudget location;
};

struct DetectorThresholds {
  Threshold proposal;
  Threshold presence;
  Threshold location;
  DetectorBudgets budgets{};
  CompositionMode mode = CompositionMode::SharedEvent;
  /// Presence and location budgets once the proposal budget is absorbed.
  ComposedBudget presence_given_proposal;
  ComposedBudget location_given_proposal;
  ComposedBudget detection_strict;
  ComposedBudget detection_shared;
  /// Fraction of true boxes matched by no proposal at all; no proposal
  /// threshold can bring the proposal error below it.
  double proposal_error_floor = 0.0;

  const ComposedBudget& detection() const noexcept {
    return mode == CompositionMode::StrictChain ? detection_strict : detection_shared;
  }

  /// Thresholds set by hand, with budget fields derived from `budgets`.
  static DetectorThresholds fixed(double tau_proposal, double tau_presence, double tau_location,
                                  const DetectorBudgets& budgets = {},
                                  CompositionMode mode = CompositionMode::SharedEvent);
};

// ---------------------------------------------------------------------------
// Component prediction sets

/// Indices of proposals with objectness >= tau_prp.
std::vector<std::size_t> proposal_indices(const ImageRecord& image, const Threshold& tau_prp);
std::vector<BoundingBox> proposal_set(const ImageRecord& image, const Threshold& tau_prp);

/// Subset of {0, 1}: e = 1 is included iff score >= tau, e = 0 iff
/// 1 - score >= tau.
struct PresenceSet {
  bool absent = false;
  bool present = false;

  bool contains(bool e) const noexcept { return e ? present : absent; }
  bool empty() const noexcept { return !absent && !present; }
  friend bool operator==(const PresenceSet&, const PresenceSet&) = default;
};

/// A missing score counts as 0. Throws std::domain_error when the score is
/// outside [0, 1].
PresenceSet presence_set(std::optional<double> score, const Threshold& tau_prs);

/// Boxes with density >= tau_loc. Throws std::domain_error on a negative
/// density.
std::vector<BoundingBox> location_set(std::span<const ScoredBox> candidates,
                                      const Threshold& tau_loc);

/// Union over in-set proposals r and classes c of { (b, c, e) : e in
/// presence set, b in location set }.
std::vector<Detection> detection_set(const ImageRecord& image, const DetectorThresholds& thresholds);

// ---------------------------------------------------------------------------
// Component losses

/// Where the presence and location components are read for one true box.
struct ProposalSlot {
  /// nullopt for a true box that no proposal covers; every score is missing.
  std::optional<std::size_t> proposal;
};

/// Supplies the proposal at which a true box is scored: the smallest-score
/// proposal identified with it, drawn either from the calibrated proposal
/// set or, for the ground-truth proposer, from every proposal.
class Proposer {
 public:
  static Proposer estimated(const Threshold& tau_prp);
  static Proposer ground_truth();

  /// nullopt when the proposer does not output the true box.
  std::optional<ProposalSlot> slot_for(const ImageRecord& image, const BoundingBox& truth) const;

  bool is_ground_truth() const noexcept { return !tau_prp_.has_value(); }

 private:
  explicit Proposer(std::optional<Threshold> tau) : tau_prp_(tau) {}
  std::optional<Threshold> tau_prp_;
};

/// 0/1 losses; 1 means the true label is outside the set.
int loss_prp(const ImageRecord& image, const Detection& truth, const Threshold& tau_prp);
int loss_prs(const ImageRecord& image, const Detection& truth, const Threshold& tau_prs,
             const Proposer& proposer);
int loss_loc(const ImageRecord& image, const Detection& truth, const Threshold& tau_loc,
             const Proposer& proposer);
int loss_det(const ImageRecord& image, const Detection& truth, const DetectorThresholds& thresholds);

/// True when `set` holds (b', c, e) with c and e equal to the truth's and
/// same_box(b', truth.box).
bool contains_detection(std::span<const Detection> set, const Detection& truth);

// ---------------------------------------------------------------------------
// Calibration

/// True-label scores of one ground-truth detection, one per component.
struct ComponentScores {
  /// Smallest objectness over proposals identified with the true box.
  double proposal = 0.0;
  /// Presence probability of the true flag at the ground-truth proposer slot.
  double presence = 0.0;
  /// Largest density of a location candidate identified with the true box.
  double location = 0.0;
};

ComponentScores true_label_scores(const ImageRecord& image, const Detection& truth);

struct DetectorRecords {
  std::vector<CalibrationRecord> proposal;
  std::vector<CalibrationRecord> presence;
  std::vector<CalibrationRecord> location;
  /// Number of true boxes matched by no proposal.
  std::size_t unmatched = 0;
};

DetectorRecords detector_records(std::span<const ImageRecord> images);

/// Calibrates the three component thresholds; presence and location use the
/// ground-truth proposer. Throws std::domain_error when the images hold no
/// ground truth.
DetectorThresholds calibrate_detector(std::span<const ImageRecord> images,
                                      const DetectorBudgets& budgets,
                                      CompositionMode mode = CompositionMode::SharedEvent);

/// Mean 0/1 losses over every ground-truth detection, with presence and
/// location read through the calibrated proposal set.
struct DetectorErrors {
  double proposal = 0.0;
  double presence = 0.0;
  double location = 0.0;
  double detection = 0.0;
  std::size_t truths = 0;
};

/// Throws std::domain_error when the images hold no ground truth.
DetectorErrors evaluate_detector(std::span<const ImageRecord> images,
                                 const DetectorThresholds& thresholds);

}  // namespace pacset
