#include "pacset/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pacset {

std::optional<double> ImageRecord::presence_score(std::size_t proposal, int class_label) const {
  auto it = presence_scores.find({proposal, class_label});
  if (it == presence_scores.end()) return std::nullopt;
  return it->second;
}

std::span<const ScoredBox> ImageRecord::candidates(std::size_t proposal, int class_label) const {
  auto it = location_candidates.find({proposal, class_label});
  if (it == location_candidates.end()) return {};
  return it->second;
}

namespace {

[[noreturn]] void invalid_image(const ImageRecord& image, const std::string& what) {
  throw std::domain_error("image '" + image.image_id + "': " + what);
}

void check_key(const ImageRecord& image, const ProposalClass& key, int num_classes) {
  if (key.proposal >= image.proposals.size()) {
    invalid_image(image, "reference to proposal " + std::to_string(key.proposal) + " out of range");
  }
  if (key.class_label < 0 || key.class_label >= num_classes) {
    invalid_image(image, "class " + std::to_string(key.class_label) + " outside the class set");
  }
}

}  // namespace

void validate(const ImageRecord& image, int num_classes) {
  for (const auto& p : image.proposals) {
    if (!p.box.valid()) invalid_image(image, "invalid proposal box");
    if (!std::isfinite(p.score) || p.score < 0.0) invalid_image(image, "negative objectness score");
  }
  for (const auto& [key, score] : image.presence_scores) {
    check_key(image, key, num_classes);
    if (!(score >= 0.0 && score <= 1.0)) invalid_image(image, "presence score outside [0, 1]");
  }
  for (const auto& [key, cands] : image.location_candidates) {
    check_key(image, key, num_classes);
    for (const auto& c : cands) {
      if (!c.box.valid()) invalid_image(image, "invalid location box");
      if (!std::isfinite(c.score) || c.score < 0.0) invalid_image(image, "negative location density");
    }
  }
  for (const auto& gt : image.ground_truth) {
    if (!gt.detection.box.valid()) invalid_image(image, "invalid ground-truth box");
    if (gt.detection.class_label < 0 || gt.detection.class_label >= num_classes) {
      invalid_image(image, "ground-truth class outside the class set");
    }
  }
}

void validate(const Dataset& dataset) {
  if (dataset.num_classes < 1) throw std::domain_error("dataset needs at least one class");
  for (const auto& image : dataset.images) validate(image, dataset.num_classes);
}

// ---------------------------------------------------------------------------

ComposedBudget as_composed(const RiskBudget& budget) { return {budget.epsilon, budget.delta}; }

ComposedBudget compose(const ComposedBudget& a, const ComposedBudget& b) {
  for (double v : {a.epsilon, a.delta, b.epsilon, b.delta}) {
    if (!(v >= 0.0)) throw std::domain_error("budget components must be nonnegative");
  }
  return {a.epsilon + b.epsilon, a.delta + b.delta};
}

ComposedBudget compose_budgets(const RiskBudget& proposal, const RiskBudget& presence,
                               const RiskBudget& location, CompositionMode mode) {
  const auto prp = as_composed(proposal);
  const auto prs = as_composed(presence);
  const auto loc = as_composed(location);
  if (mode == CompositionMode::StrictChain) {
    return compose(compose(prs, prp), compose(loc, prp));
  }
  return compose(compose(prp, prs), loc);
}

DetectorThresholds DetectorThresholds::fixed(double tau_proposal, double tau_presence,
                                             double tau_location, const DetectorBudgets& budgets,
                                             CompositionMode mode) {
  DetectorThresholds t;
  t.proposal = Threshold::fixed(tau_proposal);
  t.presence = Threshold::fixed(tau_presence);
  t.location = Threshold::fixed(tau_location);
  t.proposal.budget = budgets.proposal;
  t.presence.budget = budgets.presence;
  t.location.budget = budgets.location;
  t.budgets = budgets;
  t.mode = mode;
  t.presence_given_proposal = compose(as_composed(budgets.presence), as_composed(budgets.proposal));
  t.location_given_proposal = compose(as_composed(budgets.location), as_composed(budgets.proposal));
  t.detection_strict = compose_budgets(budgets.proposal, budgets.presence, budgets.location,
                                       CompositionMode::StrictChain);
  t.detection_shared = compose_budgets(budgets.proposal, budgets.presence, budgets.location,
                                       CompositionMode::SharedEvent);
  return t;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> proposal_indices(const ImageRecord& image, const Threshold& tau_prp) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < image.proposals.size(); ++i) {
    if (image.proposals[i].score >= tau_prp.tau) out.push_back(i);
  }
  return out;
}

std::vector<BoundingBox> proposal_set(const ImageRecord& image, const Threshold& tau_prp) {
  std::vector<BoundingBox> out;
  for (std::size_t i : proposal_indices(image, tau_prp)) out.push_back(image.proposals[i].box);
  return out;
}

PresenceSet presence_set(std::optional<double> score, const Threshold& tau_prs) {
  const double f = score.value_or(0.0);
  if (!(f >= 0.0 && f <= 1.0)) {
    throw std::domain_error("presence score outside [0, 1]");
  }
  return {.absent = (1.0 - f) >= tau_prs.tau, .present = f >= tau_prs.tau};
}

std::vector<BoundingBox> location_set(std::span<const ScoredBox> candidates,
                                      const Threshold& tau_loc) {
  std::vector<BoundingBox> out;
  for (const auto& c : candidates) {
    if (!(c.score >= 0.0)) throw std::domain_error("negative location density");
    if (c.score >= tau_loc.tau) out.push_back(c.box);
  }
  return out;
}

std::vector<Detection> detection_set(const ImageRecord& image, const DetectorThresholds& thresholds) {
  std::vector<Detection> out;
  // A class without location candidates contributes an empty location set,
  // so walking the candidate map covers the union over every class.
  for (std::size_t r : proposal_indices(image, thresholds.proposal)) {
    auto it = image.location_candidates.lower_bound({r, std::numeric_limits<int>::min()});
    for (; it != image.location_candidates.end() && it->first.proposal == r; ++it) {
      const int c = it->first.class_label;
      const auto presence = presence_set(image.presence_score(r, c), thresholds.presence);
      if (presence.empty()) continue;
      for (const auto& b : location_set(it->second, thresholds.location)) {
        if (presence.absent) out.push_back({b, c, false});
        if (presence.present) out.push_back({b, c, true});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Proposer Proposer::estimated(const Threshold& tau_prp) { return Proposer(tau_prp); }
Proposer Proposer::ground_truth() { return Proposer(std::nullopt); }

std::optional<ProposalSlot> Proposer::slot_for(const ImageRecord& image,
                                               const BoundingBox& truth) const {
  if (!tau_prp_) {
    return ProposalSlot{smallest_score_match(truth, image.proposals)};
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < image.proposals.size(); ++i) {
    const auto& p = image.proposals[i];
    if (p.score < tau_prp_->tau || !same_box(p.box, truth)) continue;
    if (!best || p.score < image.proposals[*best].score) best = i;
  }
  if (!best) return std::nullopt;
  return ProposalSlot{best};
}

namespace {

std::optional<double> slot_presence(const ImageRecord& image, const ProposalSlot& slot, int c) {
  if (!slot.proposal) return std::nullopt;
  return image.presence_score(*slot.proposal, c);
}

std::span<const ScoredBox> slot_candidates(const ImageRecord& image, const ProposalSlot& slot, int c) {
  if (!slot.proposal) return {};
  return image.candidates(*slot.proposal, c);
}

}  // namespace

int loss_prp(const ImageRecord& image, const Detection& truth, const Threshold& tau_prp) {
  for (const auto& p : image.proposals) {
    if (p.score >= tau_prp.tau && same_box(p.box, truth.box)) return 0;
  }
  return 1;
}

int loss_prs(const ImageRecord& image, const Detection& truth, const Threshold& tau_prs,
             const Proposer& proposer) {
  const auto slot = proposer.slot_for(image, truth.box);
  if (!slot) return 1;
  const auto set = presence_set(slot_presence(image, *slot, truth.class_label), tau_prs);
  return set.contains(truth.present) ? 0 : 1;
}

int loss_loc(const ImageRecord& image, const Detection& truth, const Threshold& tau_loc,
             const Proposer& proposer) {
  const auto slot = proposer.slot_for(image, truth.box);
  if (!slot) return 1;
  for (const auto& b : location_set(slot_candidates(image, *slot, truth.class_label), tau_loc)) {
    if (same_box(b, truth.box)) return 0;
  }
  return 1;
}

bool contains_detection(std::span<const Detection> set, const Detection& truth) {
  return std::any_of(set.begin(), set.end(), [&](const Detection& d) {
    return d.class_label == truth.class_label && d.present == truth.present &&
           same_box(d.box, truth.box);
  });
}

int loss_det(const ImageRecord& image, const Detection& truth, const DetectorThresholds& thresholds) {
  return contains_detection(detection_set(image, thresholds), truth) ? 0 : 1;
}

// ---------------------------------------------------------------------------

ComponentScores true_label_scores(const ImageRecord& image, const Detection& truth) {
  ComponentScores s;
  const auto slot = *Proposer::ground_truth().slot_for(image, truth.box);
  if (slot.proposal) s.proposal = image.proposals[*slot.proposal].score;

  const double f = slot_presence(image, slot, truth.class_label).value_or(0.0);
  s.presence = truth.present ? f : 1.0 - f;

  for (const auto& c : slot_candidates(image, slot, truth.class_label)) {
    if (same_box(c.box, truth.box)) s.location = std::max(s.location, c.score);
  }
  return s;
}

DetectorRecords detector_records(std::span<const ImageRecord> images) {
  DetectorRecords out;
  for (const auto& image : images) {
    for (const auto& gt : image.ground_truth) {
      const auto s = true_label_scores(image, gt.detection);
      out.proposal.push_back({s.proposal});
      out.presence.push_back({s.presence});
      out.location.push_back({s.location});
      if (!smallest_score_match(gt.detection.box, image.proposals)) ++out.unmatched;
    }
  }
  return out;
}

DetectorThresholds calibrate_detector(std::span<const ImageRecord> images,
                                      const DetectorBudgets& budgets, CompositionMode mode) {
  const auto records = detector_records(images);
  if (records.proposal.empty()) {
    throw std::domain_error("calibrate_detector requires at least one ground-truth detection");
  }
  auto out = DetectorThresholds::fixed(0.0, 0.0, 0.0, budgets, mode);
  out.proposal = calibrate_threshold(records.proposal, budgets.proposal);
  out.presence = calibrate_threshold(records.presence, budgets.presence);
  out.location = calibrate_threshold(records.location, budgets.location);
  out.proposal_error_floor =
      static_cast<double>(records.unmatched) / static_cast<double>(records.proposal.size());
  return out;
}

DetectorErrors evaluate_detector(std::span<const ImageRecord> images,
                                 const DetectorThresholds& thresholds) {
  DetectorErrors e;
  const auto proposer = Proposer::estimated(thresholds.proposal);
  for (const auto& image : images) {
    const auto set = detection_set(image, thresholds);
    for (const auto& gt : image.ground_truth) {
      const auto& truth = gt.detection;
      e.proposal += loss_prp(image, truth, thresholds.proposal);
      e.presence += loss_prs(image, truth, thresholds.presence, proposer);
      e.location += loss_loc(image, truth, thresholds.location, proposer);
      e.detection += contains_detection(set, truth) ? 0 : 1;
      ++e.truths;
    }
  }
  if (e.truths == 0) throw std::domain_error("evaluate_detector: no ground-truth detections");
  const auto n = static_cast<double>(e.truths);
  e.proposal /= n;
  e.presence /= n;
  e.location /= n;
  e.detection /= n;
  return e;
}

}  // namespace pacset
