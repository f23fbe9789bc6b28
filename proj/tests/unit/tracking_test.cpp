#include <cmath>

#include <stdexcept>

#include "doctest.h"
#include "pacset/tracking.hpp"

using namespace pacset;

namespace {

struct Obj {
  std::int64_t id;
  BoundingBox box;
};

ImageRecord frame(const std::string& seq, std::int64_t t, std::vector<Obj> objs) {
  ImageRecord im;
  im.image_id = seq + "/" + std::to_string(t);
  im.sequence_id = seq;
  im.frame_index = t;
  for (const auto& o : objs) im.ground_truth.push_back({{o.box, 0, true}, o.id});
  return im;
}

BoundingBox box_at(double x) { return {x, 0, x + 10, 10}; }

}  // namespace

TEST_CASE("edge score") {
  const Detection a{box_at(0), 1, true};
  CHECK(edge_score(a, a) == 1.0);
  CHECK(edge_score(a, {box_at(0), 2, true}) == 0.0);
  CHECK(edge_score(a, {box_at(0), 1, false}) == 0.0);
  const Detection b{box_at(3), 1, true};
  CHECK(edge_score(a, b) == edge_score(b, a));
  CHECK(edge_score(a, b) == doctest::Approx(70.0 / 130.0));
}

TEST_CASE("edge set") {
  const std::vector<Detection> t0{{box_at(0), 0, true}, {box_at(100), 0, true}};
  const std::vector<Detection> t1{{{0, 0, 10, 6}, 0, true}, {box_at(300), 0, true}};
  EdgeThreshold zero;
  CHECK(edge_set(t0, t1, zero).size() == 4);
  EdgeThreshold half;
  half.tau = Threshold::fixed(0.5);
  const auto s = edge_set(t0, t1, half);
  REQUIRE(s.size() == 1);
  CHECK(s[0].first == t0[0]);
  CHECK(s[0].second == t1[0]);
  CHECK(edge_set({}, t1, zero).empty());
  CHECK(edge_set(t0, {}, zero).empty());
}

TEST_CASE("frame pairs and halves") {
  Dataset d;
  d.images = {frame("b", 1, {}), frame("a", 2, {}), frame("a", 0, {}), frame("a", 1, {}),
              frame("b", 0, {}), frame("a", 3, {}), frame("b", 3, {})};
  const auto pairs = frame_pairs(d);
  // b/1 -> b/3 has a gap and is skipped
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].sequence_id == "a");
  CHECK(pairs[0].t == 0);
  CHECK(pairs[2].t == 2);
  CHECK(pairs[3].sequence_id == "b");

  const auto halves = split_halves(pairs);
  // a has frames 0..3 cut at 2: (0,1) first, (1,2) straddles, (2,3) second;
  // b has frames 0,1 cut at 1, so its one pair straddles
  CHECK(halves.first.size() == 1);
  CHECK(halves.second.size() == 1);

  Dataset dup;
  dup.images = {frame("a", 0, {}), frame("a", 0, {})};
  CHECK_THROWS_AS(frame_pairs(dup), std::domain_error);
  Dataset dup_id;
  dup_id.images = {frame("a", 0, {{1, box_at(0)}, {1, box_at(50)}})};
  CHECK_THROWS_AS(frame_pairs(dup_id), std::domain_error);
}

TEST_CASE("true transitions skip objects that leave") {
  Dataset d;
  d.images = {frame("s", 0, {{1, box_at(0)}, {2, box_at(50)}}), frame("s", 1, {{1, box_at(2)}})};
  const auto pairs = frame_pairs(d);
  std::size_t excluded = 0;
  const auto tr = true_transitions(pairs[0], &excluded);
  REQUIRE(tr.size() == 1);
  CHECK(tr[0].object_id == 1);
  CHECK(excluded == 1);
}

TEST_CASE("edge calibration") {
  Dataset d;
  for (int t = 0; t < 40; ++t) d.images.push_back(frame("s", t, {{1, box_at(0)}, {2, box_at(100)}}));
  const auto pairs = frame_pairs(d);
  const auto tau = calibrate_edges(pairs, {0.1, 0.1});
  CHECK(tau.tau.tau == 1.0);
  const auto gt = DetectionProvider::ground_truth();
  CHECK(fnr(pairs, tau, gt) == 0.0);
  CHECK(afp(pairs, tau, gt) == 0.0);

  Dataset tiny;
  tiny.images = {frame("s", 0, {{1, box_at(0)}}), frame("s", 1, {{1, box_at(0)}})};
  const auto tiny_pairs = frame_pairs(tiny);
  const auto trivial = calibrate_edges(tiny_pairs, {0.1, 0.01});
  CHECK(trivial.tau.tau == 0.0);
  CHECK(trivial.tau.infeasible());

  Dataset empty;
  empty.images = {frame("s", 0, {}), frame("s", 1, {})};
  const auto empty_pairs = frame_pairs(empty);
  CHECK_THROWS_AS(calibrate_edges(empty_pairs, {0.1, 0.1}), std::domain_error);
  CHECK_THROWS_AS(fnr(empty_pairs, tau, gt), std::domain_error);
}

TEST_CASE("fnr and afp at the extreme thresholds") {
  Dataset d;
  d.images = {frame("s", 0, {{1, box_at(0)}, {2, box_at(50)}, {3, box_at(100)}}),
              frame("s", 1, {{1, box_at(1)}, {2, box_at(51)}, {3, box_at(101)}, {4, box_at(200)}})};
  const auto pairs = frame_pairs(d);
  const auto gt = DetectionProvider::ground_truth();
  EdgeThreshold all;
  CHECK(fnr(pairs, all, gt) == 0.0);
  // global anchoring: the m*n cross product minus the true pair
  CHECK(afp(pairs, all, gt, Anchoring::Global) == 3.0 * 4.0 - 1.0);
  CHECK(afp(pairs, all, gt, Anchoring::PerObject) == 3.0);
  EdgeThreshold none;
  none.tau = Threshold::fixed(kEmptySetTau);
  CHECK(fnr(pairs, none, gt) == 1.0);
  CHECK(afp(pairs, none, gt) == 0.0);
}

TEST_CASE("top-k baseline") {
  Dataset d;
  // object 2 jumps next to object 1 and outscores object 1's true partner;
  // object 2 itself has only zero scores and keeps the first index
  d.images = {frame("s", 0, {{1, box_at(0)}, {2, box_at(40)}}),
              frame("s", 1, {{2, box_at(1)}, {1, box_at(4)}})};
  const auto pairs = frame_pairs(d);
  const auto gt = DetectionProvider::ground_truth();
  const auto top1 = topk_baseline(pairs, 1, gt);
  CHECK(top1.transitions == 2);
  CHECK(top1.misses == 1);
  CHECK(top1.fnr == 0.5);
  CHECK(top1.afp == 0.5);
  const auto top2 = topk_baseline(pairs, 2, gt);
  CHECK(top2.fnr == 0.0);
  CHECK(top2.afp == 1.0);
  // k beyond the frame size keeps everything
  CHECK(topk_baseline(pairs, 5, gt).fnr == 0.0);
  CHECK_THROWS_AS(topk_baseline(pairs, 0, gt), std::domain_error);
}

TEST_CASE("top-k ties keep index order") {
  Dataset d;
  d.images = {frame("s", 0, {{1, box_at(0)}}), frame("s", 1, {{2, box_at(0)}, {1, box_at(0)}})};
  const auto pairs = frame_pairs(d);
  const auto top1 = topk_baseline(pairs, 1, DetectionProvider::ground_truth());
  CHECK(top1.fnr == 1.0);
}

TEST_CASE("estimated detections are matched by box, class and flag") {
  Dataset d;
  d.images = {frame("s", 0, {{1, box_at(0)}}), frame("s", 1, {{1, box_at(2)}})};
  for (auto& im : d.images) {
    const auto b = im.ground_truth[0].detection.box;
    im.proposals = {{b, 0.9}};
    im.presence_scores[{0, 0}] = 0.9;
    im.location_candidates[{0, 0}] = {{b, 0.9}, {b.translated(100, 0), 0.8}};
  }
  const auto pairs = frame_pairs(d);
  const auto est = DetectionProvider::estimated(DetectorThresholds::fixed(0.5, 0.5, 0.5));
  const auto m = evaluate_edges(pairs, EdgeRule::threshold(0.5), est, Anchoring::Global);
  CHECK(m.fnr == 0.0);
  // the two decoys overlap each other as well
  CHECK(m.afp == 1.0);
}

TEST_CASE("composed edge budget") {
  const ComposedBudget det{0.2, 1e-5};
  CHECK(composed_edge_budget(det, {0.01, 0.01}).epsilon == doctest::Approx(0.21).epsilon(1e-12));
  CHECK(composed_edge_budget(det, {0.005, 0.01}).epsilon == doctest::Approx(0.205).epsilon(1e-12));
  CHECK(composed_edge_budget(det, {0.001, 0.01}).epsilon == doctest::Approx(0.201).epsilon(1e-12));
  CHECK(composed_edge_budget(det, {0.0, 0.0}).epsilon == 0.2);
}
