#pragma once

#include <optional>
#include <span>

namespace pacset {

/// Axis-aligned box with closed coordinate intervals. Area is
/// (x_max - x_min) * (y_max - y_min) with no pixel offset, so the same code
/// serves pixel and normalized coordinates. Zero-area boxes are allowed.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept;
  BoundingBox translated(double dx, double dy) const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws std::domain_error for non-finite or inverted coordinates.
void require_valid(const BoundingBox& box);

/// A box paired with a nonnegative score (objectness, or location density).
struct ScoredBox {
  BoundingBox box;
  double score = 0.0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

/// Intersection over union; 0 when the union has zero area.
double iou(const BoundingBox& a, const BoundingBox& b);

/// IoU above which a predicted box is identified with a true box.
inline constexpr double kSameBoxIoU = 0.25;

/// Box identity used by every loss: iou(pred, truth) > 0.25 (strict).
bool same_box(const BoundingBox& pred, const BoundingBox& truth);

/// Index of the smallest-score proposal identified with `truth`; the first
/// one in input order wins a tie.
std::optional<std::size_t> smallest_score_match(const BoundingBox& truth,
                                                std::span<const ScoredBox> proposals);

/// Value form of smallest_score_match.
std::optional<ScoredBox> match_truth_to_proposals(const BoundingBox& truth,
                                                  std::span<const ScoredBox> proposals);

}  // namespace pacset
