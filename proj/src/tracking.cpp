#include "pacset/tracking.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pacset {

DetectionProvider DetectionProvider::ground_truth() { return DetectionProvider(std::nullopt); }

DetectionProvider DetectionProvider::estimated(const DetectorThresholds& thresholds) {
  return DetectionProvider(thresholds);
}

FrameDetections DetectionProvider::detect(const ImageRecord& image) const {
  FrameDetections out;
  if (thresholds_) {
    out.detections = detection_set(image, *thresholds_);
    return out;
  }
  for (const auto& gt : image.ground_truth) {
    out.detections.push_back(gt.detection);
    out.object_ids.push_back(gt.object_id);
  }
  return out;
}

std::vector<FramePair> frame_pairs(const Dataset& dataset) {
  std::map<std::string, std::vector<const ImageRecord*>> sequences;
  for (const auto& image : dataset.images) {
    if (!image.frame_index) continue;
    std::set<std::int64_t> ids;
    for (const auto& gt : image.ground_truth) {
      if (gt.object_id && !ids.insert(*gt.object_id).second) {
        throw std::domain_error("image '" + image.image_id + "': object identity " +
                                std::to_string(*gt.object_id) + " repeats within the frame");
      }
    }
    sequences[image.sequence_id].push_back(&image);
  }

  std::vector<FramePair> out;
  for (auto& [sequence, frames] : sequences) {
    std::sort(frames.begin(), frames.end(), [](const ImageRecord* a, const ImageRecord* b) {
      return *a->frame_index < *b->frame_index;
    });
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
      const auto t = *frames[i]->frame_index;
      const auto t1 = *frames[i + 1]->frame_index;
      if (t == t1) {
        throw std::domain_error("sequence '" + sequence + "' repeats frame " + std::to_string(t));
      }
      if (t1 == t + 1) out.push_back({sequence, t, frames[i], frames[i + 1]});
    }
  }
  return out;
}

SplitPairs split_halves(std::span<const FramePair> pairs) {
  std::map<std::string, std::vector<std::int64_t>> frames;
  for (const auto& p : pairs) {
    auto& f = frames[p.sequence_id];
    f.push_back(p.t);
    f.push_back(p.t + 1);
  }
  std::map<std::string, std::int64_t> cut;
  for (auto& [sequence, f] : frames) {
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    cut[sequence] = f[f.size() / 2];
  }
  SplitPairs out;
  for (const auto& p : pairs) {
    const auto c = cut[p.sequence_id];
    if (p.t + 1 < c) {
      out.first.push_back(p);
    } else if (p.t >= c) {
      out.second.push_back(p);
    }
  }
  return out;
}

std::vector<Transition> true_transitions(const FramePair& pair, std::size_t* excluded) {
  std::vector<Transition> out;
  std::size_t skipped = 0;
  for (const auto& a : pair.frame_t->ground_truth) {
    const GroundTruth* partner = nullptr;
    if (a.object_id) {
      for (const auto& b : pair.frame_t1->ground_truth) {
        if (b.object_id == a.object_id) {
          partner = &b;
          break;
        }
      }
    }
    if (partner) {
      out.push_back({*a.object_id, a.detection, partner->detection});
    } else {
      ++skipped;
    }
  }
  if (excluded) *excluded += skipped;
  return out;
}

double edge_score(const Detection& a, const Detection& b) {
  if (a.class_label != b.class_label || !a.present || !b.present) return 0.0;
  return iou(a.box, b.box);
}

std::vector<EdgePair> edge_set(std::span<const Detection> dets_t, std::span<const Detection> dets_t1,
                               const EdgeThreshold& tau) {
  std::vector<EdgePair> out;
  for (const auto& a : dets_t) {
    for (const auto& b : dets_t1) {
      if (edge_score(a, b) >= tau.tau.tau) out.emplace_back(a, b);
    }
  }
  return out;
}

std::vector<CalibrationRecord> edge_records(std::span<const FramePair> pairs, std::size_t* excluded) {
  std::vector<CalibrationRecord> out;
  for (const auto& pair : pairs) {
    for (const auto& tr : true_transitions(pair, excluded)) {
      out.push_back({edge_score(tr.from, tr.to)});
    }
  }
  return out;
}

EdgeThreshold calibrate_edges(std::span<const FramePair> pairs, const RiskBudget& budget) {
  EdgeThreshold out;
  const auto records = edge_records(pairs, &out.excluded);
  if (records.empty()) {
    throw std::domain_error("calibrate_edges: no true transitions in the data");
  }
  out.tau = calibrate_threshold(records, budget);
  out.budget = budget;
  return out;
}

EdgeRule EdgeRule::top_k(std::size_t k) {
  if (k == 0) throw std::domain_error("top-k baseline requires k >= 1");
  return {Kind::TopK, 0.0, k};
}

namespace {

std::vector<std::size_t> representatives(const FrameDetections& dets, std::int64_t object_id,
                                         const Detection& truth) {
  std::vector<std::size_t> out;
  const bool by_identity = !dets.object_ids.empty();
  for (std::size_t i = 0; i < dets.detections.size(); ++i) {
    if (by_identity) {
      if (dets.object_ids[i] == object_id) out.push_back(i);
      continue;
    }
    const auto& d = dets.detections[i];
    if (d.class_label == truth.class_label && d.present == truth.present && same_box(d.box, truth.box)) {
      out.push_back(i);
    }
  }
  return out;
}

// selected[a][b]: whether (dets_t[a], dets_t1[b]) is in the edge set.
std::vector<std::vector<char>> select_edges(const EdgeRule& rule, const FrameDetections& dets_t,
                                            const FrameDetections& dets_t1) {
  const auto& from = dets_t.detections;
  const auto& to = dets_t1.detections;
  std::vector<std::vector<char>> selected(from.size(), std::vector<char>(to.size(), 0));
  std::vector<double> scores(to.size());
  std::vector<std::size_t> order(to.size());
  for (std::size_t a = 0; a < from.size(); ++a) {
    for (std::size_t b = 0; b < to.size(); ++b) scores[b] = edge_score(from[a], to[b]);
    if (rule.kind == EdgeRule::Kind::Threshold) {
      for (std::size_t b = 0; b < to.size(); ++b) selected[a][b] = scores[b] >= rule.tau;
      continue;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
    const auto keep = std::min(rule.k, order.size());
    for (std::size_t j = 0; j < keep; ++j) selected[a][order[j]] = 1;
  }
  return selected;
}

}  // namespace

std::vector<TransitionOutcome> evaluate_frame_pair(const FramePair& pair, const EdgeRule& rule,
                                                   const FrameDetections& dets_t,
                                                   const FrameDetections& dets_t1,
                                                   Anchoring anchoring) {
  const auto selected = select_edges(rule, dets_t, dets_t1);
  std::size_t total = 0;
  for (const auto& row : selected) total += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));

  std::vector<TransitionOutcome> out;
  for (const auto& tr : true_transitions(pair)) {
    const auto from = representatives(dets_t, tr.object_id, tr.from);
    const auto to = representatives(dets_t1, tr.object_id, tr.to);
    bool inside = false;
    std::size_t anchored = 0;
    for (std::size_t a : from) {
      const auto& row = selected[a];
      anchored += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
      for (std::size_t b : to) inside = inside || row[b];
    }
    const auto size = anchoring == Anchoring::PerObject ? anchored : total;
    out.push_back({tr.object_id, !inside, static_cast<double>(size) - (inside ? 1.0 : 0.0)});
  }
  return out;
}

EdgeMetrics evaluate_edges(std::span<const FramePair> pairs, const EdgeRule& rule,
                           const DetectionProvider& provider, Anchoring anchoring) {
  EdgeMetrics m;
  for (const auto& pair : pairs) {
    true_transitions(pair, &m.excluded);
    const auto outcomes = evaluate_frame_pair(pair, rule, provider.detect(*pair.frame_t),
                                              provider.detect(*pair.frame_t1), anchoring);
    for (const auto& o : outcomes) {
      ++m.transitions;
      m.misses += o.missed ? 1 : 0;
      m.false_positives += o.false_positives;
    }
  }
  if (m.transitions == 0) {
    throw std::domain_error("edge evaluation: no true transitions in the data");
  }
  const auto n = static_cast<double>(m.transitions);
  m.fnr = static_cast<double>(m.misses) / n;
  m.afp = m.false_positives / n;
  return m;
}

double fnr(std::span<const FramePair> pairs, const EdgeThreshold& tau, const DetectionProvider& provider) {
  return evaluate_edges(pairs, EdgeRule::threshold(tau.tau.tau), provider).fnr;
}

double afp(std::span<const FramePair> pairs, const EdgeThreshold& tau, const DetectionProvider& provider,
           Anchoring anchoring) {
  return evaluate_edges(pairs, EdgeRule::threshold(tau.tau.tau), provider, anchoring).afp;
}

EdgeMetrics topk_baseline(std::span<const FramePair> pairs, std::size_t k,
                          const DetectionProvider& provider, Anchoring anchoring) {
  return evaluate_edges(pairs, EdgeRule::top_k(k), provider, anchoring);
}

ComposedBudget composed_edge_budget(const ComposedBudget& detection, const ComposedBudget& edge) {
  return compose(detection, edge);
}

}  // namespace pacset
