#include "pacset/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pacset {

bool BoundingBox::valid() const noexcept {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

BoundingBox BoundingBox::translated(double dx, double dy) const noexcept {
  return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
}

void require_valid(const BoundingBox& box) {
  if (!box.valid()) {
    throw std::domain_error("bounding box requires finite coordinates with min <= max");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  require_valid(a);
  require_valid(b);
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool same_box(const BoundingBox& pred, const BoundingBox& truth) {
  return iou(pred, truth) > kSameBoxIoU;
}

std::optional<std::size_t> smallest_score_match(const BoundingBox& truth,
                                                std::span<const ScoredBox> proposals) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (!same_box(proposals[i].box, truth)) continue;
    if (!best || proposals[i].score < proposals[*best].score) best = i;
  }
  return best;
}

std::optional<ScoredBox> match_truth_to_proposals(const BoundingBox& truth,
                                                  std::span<const ScoredBox> proposals) {
  if (auto i = smallest_score_match(truth, proposals)) return proposals[*i];
  return std::nullopt;
}

}  // namespace pacset
