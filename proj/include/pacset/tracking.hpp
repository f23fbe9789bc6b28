#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pacset/detection.hpp"

namespace pacset {

/// Detections of one frame. object_ids is either empty (estimated
/// detections carry no identity) or parallel to detections.
struct FrameDetections {
  std::vector<Detection> detections;
  std::vector<std::optional<std::int64_t>> object_ids;
};

/// Produces the detections an edge set is built over: the true detection set
/// (ground-truth labels with identities) or a calibrated detection set.
class DetectionProvider {
 public:
  static DetectionProvider ground_truth();
  static DetectionProvider estimated(const DetectorThresholds& thresholds);

  FrameDetections detect(const ImageRecord& image) const;
  bool is_ground_truth() const noexcept { return !thresholds_.has_value(); }

 private:
  explicit DetectionProvider(std::optional<DetectorThresholds> t) : thresholds_(std::move(t)) {}
  std::optional<DetectorThresholds> thresholds_;
};

/// Two adjacent frames of one sequence. The pointers refer into a Dataset
/// that must outlive the pair.
struct FramePair {
  std::string sequence_id;
  std::int64_t t = 0;
  const ImageRecord* frame_t = nullptr;
  const ImageRecord* frame_t1 = nullptr;
};

/// Pairs frames (t, t + 1) within each sequence, ordered by sequence then t.
/// Throws std::domain_error when an identity repeats within a frame or a
/// sequence repeats a frame index.
std::vector<FramePair> frame_pairs(const Dataset& dataset);

struct SplitPairs {
  std::vector<FramePair> first;
  std::vector<FramePair> second;
};

/// Splits every sequence at its middle frame: pairs entirely before the cut
/// go to `first`, pairs at or after it to `second`.
SplitPairs split_halves(std::span<const FramePair> pairs);

/// One object seen in both frames of a pair.
struct Transition {
  std::int64_t object_id = 0;
  Detection from;
  Detection to;
};

/// Identity-matched transitions of a pair. Truths at t without a partner at
/// t + 1 are skipped and counted in `*excluded`.
std::vector<Transition> true_transitions(const FramePair& pair, std::size_t* excluded = nullptr);

/// IoU of the two boxes when classes agree and both flags are present, else 0.
double edge_score(const Detection& a, const Detection& b);

struct EdgeThreshold {
  Threshold tau;
  RiskBudget budget{};
  /// Frame-t objects without a partner at t + 1, left out of calibration.
  std::size_t excluded = 0;
};

using EdgePair = std::pair<Detection, Detection>;

/// Cross pairs with edge_score >= tau.
std::vector<EdgePair> edge_set(std::span<const Detection> dets_t, std::span<const Detection> dets_t1,
                               const EdgeThreshold& tau);

/// One record per true transition, scored on the ground-truth detections.
std::vector<CalibrationRecord> edge_records(std::span<const FramePair> pairs,
                                            std::size_t* excluded = nullptr);

/// Throws std::domain_error when the pairs contain no true transition.
EdgeThreshold calibrate_edges(std::span<const FramePair> pairs, const RiskBudget& budget);

/// How false positives are counted for one evaluated transition.
enum class Anchoring {
  /// Pairs whose t-side detection represents the object.
  PerObject,
  /// The whole edge set of the frame pair.
  Global,
};

/// Membership rule of an edge set: score threshold, or top-k per anchor.
struct EdgeRule {
  enum class Kind { Threshold, TopK };
  Kind kind = Kind::Threshold;
  double tau = 0.0;
  std::size_t k = 1;

  static EdgeRule threshold(double tau) { return {Kind::Threshold, tau, 0}; }
  static EdgeRule top_k(std::size_t k);
};

struct TransitionOutcome {
  std::int64_t object_id = 0;
  bool missed = false;
  double false_positives = 0.0;
};

/// Evaluates every true transition of `pair` against the edge set built over
/// the given detections. A detection represents a true one when its identity
/// matches, or, without identities, when class, flag and same_box agree.
std::vector<TransitionOutcome> evaluate_frame_pair(const FramePair& pair, const EdgeRule& rule,
                                                   const FrameDetections& dets_t,
                                                   const FrameDetections& dets_t1,
                                                   Anchoring anchoring = Anchoring::PerObject);

struct EdgeMetrics {
  double fnr = 0.0;
  double afp = 0.0;
  std::size_t transitions = 0;
  std::size_t misses = 0;
  double false_positives = 0.0;
  std::size_t excluded = 0;
};

/// FNR and AFP over all true transitions. Throws std::domain_error when
/// there is none.
EdgeMetrics evaluate_edges(std::span<const FramePair> pairs, const EdgeRule& rule,
                           const DetectionProvider& provider,
                           Anchoring anchoring = Anchoring::PerObject);

double fnr(std::span<const FramePair> pairs, const EdgeThreshold& tau, const DetectionProvider& provider);
double afp(std::span<const FramePair> pairs, const EdgeThreshold& tau, const DetectionProvider& provider,
           Anchoring anchoring = Anchoring::PerObject);

/// Naive baseline: each anchor keeps its k highest-scoring partners (ties
/// by index order). Throws std::domain_error when k == 0.
EdgeMetrics topk_baseline(std::span<const FramePair> pairs, std::size_t k,
                          const DetectionProvider& provider,
                          Anchoring anchoring = Anchoring::PerObject);

/// (eps_det + eps_edge, delta_det + delta_edge).
ComposedBudget composed_edge_budget(const ComposedBudget& detection, const ComposedBudget& edge);

}  // namespace pacset
