// Randomized invariants over boxes, component sets, losses and dumps.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "pacset/dump_io.hpp"
#include "pacset/tracking.hpp"

using namespace pacset;

namespace {

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return real(0, 1) < p; }
  double level() { return integer(0, 10) / 10.0; }

  BoundingBox box() {
    const double x = real(-50, 50), y = real(-50, 50);
    return {x, y, x + real(0.5, 40), y + real(0.5, 40)};
  }

  BoundingBox near(const BoundingBox& b) {
    const double s = 4.0;
    const double x0 = b.x_min + real(-s, s), x1 = b.x_max + real(-s, s);
    const double y0 = b.y_min + real(-s, s), y1 = b.y_max + real(-s, s);
    return {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
  }

  // Small image with proposals clustered on the truths, so matches and
  // near-misses both occur.
  ImageRecord image(int classes) {
    ImageRecord im;
    im.image_id = "r" + std::to_string(rng() % 100000);
    const int n_truth = integer(1, 3);
    for (int i = 0; i < n_truth; ++i) {
      im.ground_truth.push_back({{{box()}, integer(0, classes - 1), coin(0.8)}, i});
    }
    for (const auto& gt : im.ground_truth) {
      const int n = integer(0, 3);
      for (int j = 0; j < n; ++j) im.proposals.push_back({near(gt.detection.box), level()});
    }
    if (coin()) im.proposals.push_back({box(), level()});
    for (std::size_t r = 0; r < im.proposals.size(); ++r) {
      for (int c = 0; c < classes; ++c) {
        if (coin(0.8)) im.presence_scores[{r, c}] = level();
        std::vector<ScoredBox> cands;
        const int n = integer(0, 2);
        for (int j = 0; j < n; ++j) cands.push_back({coin() ? near(im.proposals[r].box) : box(), level()});
        if (!cands.empty()) im.location_candidates[{r, c}] = cands;
      }
    }
    return im;
  }
};

template <typename T>
bool subset(std::vector<T> a, std::vector<T> b) {
  for (const auto& x : a) {
    auto it = std::find(b.begin(), b.end(), x);
    if (it == b.end()) return false;
    b.erase(it);
  }
  return true;
}

const double kTaus[] = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};

}  // namespace

TEST_CASE("iou symmetry, identity, range and translation") {
  Gen g(1);
  for (int i = 0; i < 5000; ++i) {
    const auto a = g.box(), b = g.coin() ? g.near(a) : g.box();
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == 1.0);
    const double dx = g.real(-100, 100), dy = g.real(-100, 100);
    CHECK(std::fabs(iou(a.translated(dx, dy), b.translated(dx, dy)) - v) <= 1e-12);
  }
}

TEST_CASE("same_box agrees with a pixel count on integer boxes") {
  Gen g(2);
  for (int i = 0; i < 1500; ++i) {
    const int ax = g.integer(0, 40), ay = g.integer(0, 40);
    const int aw = g.integer(1, 64), ah = g.integer(1, 64);
    const int bx = ax + g.integer(-20, 20), by = ay + g.integer(-20, 20);
    const int bw = g.integer(1, 64), bh = g.integer(1, 64);
    const double px = oracle::raster_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh);
    const BoundingBox a{double(ax), double(ay), double(ax + aw), double(ay + ah)};
    const BoundingBox b{double(bx), double(by), double(bx + bw), double(by + bh)};
    CHECK(same_box(a, b) == (px > 0.25));
  }
}

TEST_CASE("component sets nest as thresholds grow") {
  Gen g(3);
  for (int rep = 0; rep < 300; ++rep) {
    const auto im = g.image(2);
    for (std::size_t i = 0; i + 1 < std::size(kTaus); ++i) {
      const auto lo = Threshold::fixed(kTaus[i]), hi = Threshold::fixed(kTaus[i + 1]);
      CHECK(subset(proposal_set(im, hi), proposal_set(im, lo)));
      for (const auto& [key, cands] : im.location_candidates) {
        CHECK(subset(location_set(cands, hi), location_set(cands, lo)));
        const auto p_lo = presence_set(im.presence_score(key.proposal, key.class_label), lo);
        const auto p_hi = presence_set(im.presence_score(key.proposal, key.class_label), hi);
        CHECK((!p_hi.absent || p_lo.absent));
        CHECK((!p_hi.present || p_lo.present));
      }
      const auto det_lo = DetectorThresholds::fixed(kTaus[i], kTaus[i], kTaus[i]);
      const auto det_hi = DetectorThresholds::fixed(kTaus[i + 1], kTaus[i + 1], kTaus[i + 1]);
      CHECK(subset(detection_set(im, det_hi), detection_set(im, det_lo)));
      for (const auto& gt : im.ground_truth) {
        const auto& y = gt.detection;
        CHECK(loss_prp(im, y, lo) <= loss_prp(im, y, hi));
        CHECK(loss_prs(im, y, lo, Proposer::ground_truth()) <= loss_prs(im, y, hi, Proposer::ground_truth()));
        CHECK(loss_loc(im, y, lo, Proposer::ground_truth()) <= loss_loc(im, y, hi, Proposer::ground_truth()));
        CHECK(loss_det(im, y, det_lo) <= loss_det(im, y, det_hi));
      }
    }
  }
}

TEST_CASE("a detection miss implies a presence or location miss") {
  Gen g(4);
  std::size_t misses = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const auto im = g.image(2);
    for (double a : kTaus) {
      for (double b : kTaus) {
        for (double c : kTaus) {
          const auto t = DetectorThresholds::fixed(a, b, c);
          const auto proposer = Proposer::estimated(t.proposal);
          const auto set = detection_set(im, t);
          for (const auto& gt : im.ground_truth) {
            if (contains_detection(set, gt.detection)) continue;
            ++misses;
            const bool component = loss_prs(im, gt.detection, t.presence, proposer) == 1 ||
                                   loss_loc(im, gt.detection, t.location, proposer) == 1;
            CHECK(component);
          }
        }
      }
    }
  }
  CHECK(misses > 1000);
}

TEST_CASE("true-label scores reproduce the ground-truth proposer losses") {
  Gen g(5);
  for (int rep = 0; rep < 300; ++rep) {
    const auto im = g.image(3);
    for (const auto& gt : im.ground_truth) {
      const auto s = true_label_scores(im, gt.detection);
      // tau = 0 is left out: the location set is limited to the listed
      // candidates, so a truth without a matching candidate errs even there.
      for (double tau : kTaus) {
        if (tau == 0.0) {
          CHECK(loss_prs(im, gt.detection, Threshold::fixed(0.0), Proposer::ground_truth()) == 0);
          continue;
        }
        const auto t = Threshold::fixed(tau);
        CHECK(loss_prs(im, gt.detection, t, Proposer::ground_truth()) == (s.presence < tau ? 1 : 0));
        CHECK(loss_loc(im, gt.detection, t, Proposer::ground_truth()) == (s.location < tau ? 1 : 0));
      }
    }
  }
}

TEST_CASE("edge sets nest; FNR rises and AFP falls with tau") {
  WorldConfig w;
  w.n_frames = 30;
  w.n_objects = 8;
  w.group_probability = 0.5;
  w.burst_probability = 0.05;
  w.seed = 6;
  const auto world = gen_world(w);
  const auto pairs = frame_pairs(world);
  const auto gt = DetectionProvider::ground_truth();
  double prev_fnr = -1.0, prev_afp = 1e300;
  for (double tau : {0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0}) {
    EdgeThreshold t;
    t.tau = Threshold::fixed(tau);
    const auto m = evaluate_edges(pairs, EdgeRule::threshold(tau), gt);
    CHECK(m.fnr >= prev_fnr);
    CHECK(m.afp <= prev_afp);
    prev_fnr = m.fnr;
    prev_afp = m.afp;
    if (tau > 0.0) {
      EdgeThreshold lower;
      lower.tau = Threshold::fixed(tau - 0.1);
      for (std::size_t i = 0; i < 5; ++i) {
        const auto a = gt.detect(*pairs[i].frame_t).detections;
        const auto b = gt.detect(*pairs[i].frame_t1).detections;
        CHECK(subset(edge_set(a, b, t), edge_set(a, b, lower)));
      }
    }
  }
}

TEST_CASE("edge score is symmetric") {
  Gen g(7);
  for (int i = 0; i < 2000; ++i) {
    const Detection a{g.box(), g.integer(0, 1), g.coin(0.8)};
    const Detection b{g.coin() ? g.near(a.box) : g.box(), g.integer(0, 1), g.coin(0.8)};
    CHECK(edge_score(a, b) == edge_score(b, a));
  }
}

TEST_CASE("dump round-trip on random datasets") {
  Gen g(8);
  for (int rep = 0; rep < 50; ++rep) {
    Dataset d;
    d.num_classes = 3;
    const int n = g.integer(0, 5);
    for (int i = 0; i < n; ++i) {
      auto im = g.image(3);
      im.image_id = "img" + std::to_string(i);
      if (g.coin()) {
        im.sequence_id = "s";
        im.frame_index = i;
      }
      if (g.coin()) im.ground_truth[0].object_id.reset();
      d.images.push_back(im);
    }
    std::istringstream in(serialize_dump(d));
    CHECK(parse_dump(in).dataset == d);
  }
}
