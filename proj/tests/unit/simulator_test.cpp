#include <algorithm>
#include <cmath>
#include <limits>

#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "pacset/simulator.hpp"
#include "pacset/tracking.hpp"

using namespace pacset;

namespace {

WorldConfig small_world() {
  WorldConfig w;
  w.n_sequences = 2;
  w.n_frames = 12;
  w.n_objects = 5;
  w.seed = 42;
  return w;
}

}  // namespace

TEST_CASE("gen_world is deterministic in the seed") {
  const auto a = gen_world(small_world());
  const auto b = gen_world(small_world());
  CHECK(a == b);
  auto other = small_world();
  other.seed = 43;
  CHECK_FALSE(gen_world(other) == a);
  CHECK(a.images.size() == 24);
  CHECK(a.images[0].image_id == "seq0/0");
  CHECK_NOTHROW(validate(a));
  // identities are unique across sequences
  std::vector<std::int64_t> ids;
  for (const auto& im : a.images) {
    if (im.frame_index == 0) {
      for (const auto& gt : im.ground_truth) ids.push_back(*gt.object_id);
    }
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  CHECK(ids.size() == 10);
}

TEST_CASE("world config validation") {
  auto w = small_world();
  w.drop_probability = 1.5;
  CHECK_THROWS_AS(gen_world(w), std::domain_error);
  w = small_world();
  w.box_width_max = 1.0;
  CHECK_THROWS_AS(gen_world(w), std::domain_error);
}

TEST_CASE("dropping every proposal loses every box") {
  auto w = small_world();
  w.drop_probability = 1.0;
  w.clutter_per_frame = 0.0;
  const auto d = gen_world(w);
  for (const auto& im : d.images) {
    CHECK(im.proposals.empty());
    for (const auto& gt : im.ground_truth) CHECK(loss_prp(im, gt.detection, Threshold::fixed(0.0)) == 1);
  }
}

TEST_CASE("a noiseless world has zero loss at the maximal thresholds") {
  auto w = small_world();
  w.box_jitter = 0.0;
  w.location_jitter = 0.0;
  w.impostor_rate = 0.0;
  w.score_sharpness = std::numeric_limits<double>::infinity();
  w.drop_probability = 0.0;
  w.motion_step = 0.0;  // objects stay where they were placed, apart
  const auto d = gen_world(w);
  const auto t = calibrate_detector(d.images, {{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}});
  CHECK(t.proposal.tau == 1.0);
  CHECK(t.presence.tau == 1.0);
  CHECK(t.location.tau == 1.0);
  const auto e = evaluate_detector(d.images, t);
  CHECK(e.proposal == 0.0);
  CHECK(e.presence == 0.0);
  CHECK(e.location == 0.0);
  CHECK(e.detection == 0.0);
}

TEST_CASE("seed helpers") {
  CHECK(splitmix64(0) != splitmix64(1));
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  std::mt19937_64 e(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(e);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("finite distribution") {
  const FiniteDistribution<int> two({1, 0}, {0.3, 0.7});
  CHECK(true_error(two, [](int x) { return x == 1; }) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(FiniteDistribution<int>({1}, {-1.0}), std::domain_error);
  CHECK_THROWS_AS(FiniteDistribution<int>({1, 2}, {0.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(FiniteDistribution<int>({}, {}), std::domain_error);
}

TEST_CASE("exact error agrees with sampling") {
  const auto dist = make_score_distribution(40, 10, 9);
  const double tau = 0.55;
  const double exact = true_error(dist, [&](const CalibrationRecord& r) { return r.true_score < tau; });
  std::mt19937_64 e(123);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += dist.outcome(dist.sample_index(e)).true_score < tau;
  const double se = std::sqrt(exact * (1 - exact) / n);
  CHECK(std::fabs(hits / double(n) - exact) <= 3 * se);
}

TEST_CASE("pac_trial matches an independent replay") {
  const auto dist = make_score_distribution(30, 8, 3);
  const RiskBudget b{0.2, 0.3};
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const auto got = pac_trial(dist, 50, b, seed);
    // replay: same engine and inverse-CDF draw, brute-force calibration
    std::mt19937_64 e(seed);
    std::vector<double> cum;
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) cum.push_back(acc += dist.probability(i));
    std::vector<double> scores;
    for (int i = 0; i < 50; ++i) {
      const double u = static_cast<double>(e() >> 11) * 0x1.0p-53;
      std::size_t j = 0;
      while (j + 1 < cum.size() && cum[j] <= u) ++j;
      scores.push_back(dist.outcome(j).true_score);
    }
    const double tau = oracle::calibrate(scores, oracle::k_star(50, b.epsilon, b.delta));
    double err = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) err += dist.outcome(i).true_score < tau ? dist.probability(i) : 0.0;
    CHECK(got.threshold.tau == tau);
    CHECK(got.true_error == doctest::Approx(err).epsilon(1e-12));
    CHECK(got.violated == (err > b.epsilon));
  }
}

TEST_CASE("noiseless distribution never violates") {
  const FiniteDistribution<CalibrationRecord> ones({{1.0}, {1.0}}, {1, 1});
  const auto r = pac_trial(ones, 100, {0.1, 0.1}, 5);
  CHECK(r.true_error == 0.0);
  CHECK_FALSE(r.violated);
}

TEST_CASE("mc_verify") {
  const auto dist = make_score_distribution(50, 20, 1);
  const RiskBudget b{0.1, 0.2};
  const auto serial = mc_verify(dist, 100, b, 64, 9, 1);
  const auto parallel = mc_verify(dist, 100, b, 64, 9, 4);
  CHECK(serial.violations == parallel.violations);
  CHECK(serial.mean_true_error == parallel.mean_true_error);
  CHECK(serial.trials == 64);
  CHECK(serial.interval.lower <= serial.fraction);
  CHECK(serial.interval.upper >= serial.fraction);
  const auto once = mc_verify(dist, 100, b, 1, 9, 1);
  CHECK((once.fraction == 0.0 || once.fraction == 1.0));
}
