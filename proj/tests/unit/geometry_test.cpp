#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "pacset/geometry.hpp"

using namespace pacset;

TEST_CASE("iou hand values") {
  const BoundingBox a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 13}) == doctest::Approx(10.0 / 13.0).epsilon(1e-15));
  // touching edges share no area
  CHECK(iou(a, {2, 0, 4, 2}) == 0.0);
  // zero-area boxes
  CHECK(iou({1, 1, 1, 1}, {1, 1, 1, 1}) == 0.0);
  CHECK(iou({0, 0, 0, 5}, a) == 0.0);
}

TEST_CASE("iou rejects invalid boxes") {
  CHECK_THROWS_AS(iou({2, 0, 1, 1}, {0, 0, 1, 1}), std::domain_error);
  CHECK_THROWS_AS(iou({0, 0, 1, 1}, {0, 0, 1, std::nan("")}), std::domain_error);
  CHECK_THROWS_AS(require_valid({0, 0, INFINITY, 1}), std::domain_error);
}

TEST_CASE("same_box threshold is strict") {
  CHECK(same_box({0, 0, 2, 2}, {0, 0, 2, 2}));
  CHECK_FALSE(same_box({0, 0, 2, 2}, {1, 1, 3, 3}));
  CHECK(same_box({0, 0, 10, 10}, {0, 0, 10, 13}));
  // IoU exactly 0.25
  CHECK(iou({0, 0, 4, 1}, {0, 0, 1, 1}) == 0.25);
  CHECK_FALSE(same_box({0, 0, 4, 1}, {0, 0, 1, 1}));
}

TEST_CASE("matching picks the smallest score, first on ties") {
  const BoundingBox truth{0, 0, 10, 10};
  const std::vector<ScoredBox> props{{{50, 50, 60, 60}, 0.1}, {{0, 0, 10, 10}, 0.9}, {{1, 0, 11, 10}, 0.4}};
  CHECK(smallest_score_match(truth, props) == std::optional<std::size_t>{2});
  CHECK(match_truth_to_proposals(truth, props)->score == 0.4);

  const std::vector<ScoredBox> tied{{{0, 0, 10, 10}, 0.5}, {{1, 1, 10, 10}, 0.5}};
  CHECK(smallest_score_match(truth, tied) == std::optional<std::size_t>{0});

  const std::vector<ScoredBox> far{{{50, 50, 60, 60}, 0.1}};
  CHECK_FALSE(smallest_score_match(truth, far).has_value());
  CHECK_FALSE(match_truth_to_proposals(truth, {}).has_value());
}

TEST_CASE("box helpers") {
  const BoundingBox b{1, 2, 4, 8};
  CHECK(b.width() == 3);
  CHECK(b.height() == 6);
  CHECK(b.area() == 18);
  CHECK(b.translated(1, -2) == BoundingBox{2, 0, 5, 6});
  CHECK(BoundingBox{0, 0, 0, 0}.valid());
  CHECK_FALSE(BoundingBox{0, 1, 0, 0}.valid());
}
