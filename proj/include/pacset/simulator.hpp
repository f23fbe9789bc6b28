#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "pacset/binomial_tail.hpp"
#include "pacset/detection.hpp"
#include "pacset/predset.hpp"

namespace pacset {

/// Parameters of the synthetic world and its detector. Objects random-walk
/// inside the arena; the detector jitters true boxes into proposals, adds
/// clutter, and scores every (proposal, class). Independent objects are
/// placed clear of the others and clutter is never placed on a true box;
/// overlaps then come from motion and from groups.
struct WorldConfig {
  int n_sequences = 1;
  int n_frames = 50;
  int n_objects = 8;
  int n_classes = 2;
  double arena_width = 640.0;
  double arena_height = 480.0;
  double box_width_min = 32.0;
  double box_width_max = 64.0;
  /// Number of distinct box widths between min and max.
  int size_levels = 3;
  /// Box height over width.
  double aspect = 2.0;
  /// Largest per-frame displacement along each axis.
  double motion_step = 4.0;
  /// Chance per step that an object jumps to a random position.
  double burst_probability = 0.0;
  /// Chance that an object walks in lockstep next to the previous one.
  double group_probability = 0.0;
  /// Horizontal offset of a grouped object from its leader.
  double group_offset = 4.0;

  /// True-label scores are 1 - (1 - u)^(1 + sharpness); infinity gives 1.
  double score_sharpness = 4.0;
  /// Impostor scores are uniform on [0, impostor_rate].
  double impostor_rate = 0.3;
  /// Largest proposal coordinate offset from the true box.
  double box_jitter = 2.0;
  /// Largest location-candidate offset from the true box.
  double location_jitter = 0.0;
  /// Chance that an object gets no proposal in a frame.
  double drop_probability = 0.02;
  /// Chance that a presence score is missing (suppressed).
  double suppression_probability = 0.0;
  int proposals_per_object = 2;
  /// Mean number of clutter proposals per frame.
  double clutter_per_frame = 3.0;
  /// Far-off location candidates added per true (proposal, class).
  int location_decoys = 1;
  /// Snap coordinates to `grid` and scores to 1 / score_levels, and draw
  /// displacements from {-step, 0, step}.
  bool quantize = true;
  double grid = 1.0;
  int score_levels = 100;
  std::uint64_t seed = 0;
};

/// Throws std::domain_error naming the offending field.
void validate(const WorldConfig& config);

/// Deterministic in (config, seed). Sequence s is named "seq<s>" and its
/// frames "seq<s>/<t>".
Dataset gen_world(const WorldConfig& config);

// ---------------------------------------------------------------------------
// Seeds and sampling

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of trial `index` under `base`; trial i can be replayed alone.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& engine);

/// Enumerable distribution over outcomes, used where the true error of a
/// prediction set must be computed exactly rather than estimated.
template <typename Outcome>
class FiniteDistribution {
 public:
  FiniteDistribution() = default;

  /// Weights are normalized; they must be nonnegative with a positive sum.
  FiniteDistribution(std::vector<Outcome> outcomes, std::vector<double> weights)
      : outcomes_(std::move(outcomes)), probabilities_(std::move(weights)) {
    if (outcomes_.empty() || outcomes_.size() != probabilities_.size()) {
      throw std::domain_error("finite distribution needs one weight per outcome");
    }
    double total = 0.0;
    for (double w : probabilities_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::domain_error("weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw std::domain_error("weights must have a positive sum");
    double acc = 0.0;
    cumulative_.reserve(probabilities_.size());
    for (double& p : probabilities_) {
      p /= total;
      acc += p;
      cumulative_.push_back(acc);
    }
    if (std::abs(acc - 1.0) > 1e-12) throw std::domain_error("probabilities do not sum to 1");
    cumulative_.back() = 1.0;
  }

  static FiniteDistribution uniform(std::vector<Outcome> outcomes) {
    std::vector<double> w(outcomes.size(), 1.0);
    return FiniteDistribution(std::move(outcomes), std::move(w));
  }

  std::size_t size() const noexcept { return outcomes_.size(); }
  const Outcome& outcome(std::size_t i) const { return outcomes_[i]; }
  double probability(std::size_t i) const { return probabilities_[i]; }
  std::span<const Outcome> outcomes() const noexcept { return outcomes_; }

  /// Inverse-CDF draw from uniform01(engine).
  std::size_t sample_index(std::mt19937_64& engine) const {
    const double u = uniform01(engine);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), size() - 1);
  }

 private:
  std::vector<Outcome> outcomes_;
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

/// Probability-weighted sum of a 0/1 loss over the support.
template <typename Outcome, typename Loss>
double true_error(const FiniteDistribution<Outcome>& dist, Loss&& loss) {
  double err = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (loss(dist.outcome(i))) err += dist.probability(i);
  }
  return err;
}

using ScoreDistribution = FiniteDistribution<CalibrationRecord>;

/// A fixed distribution over quantized true scores, with ties and random
/// weights.
ScoreDistribution make_score_distribution(std::size_t support, int levels, std::uint64_t seed);

struct PacTrialResult {
  Threshold threshold;
  double true_error = 0.0;
  bool violated = false;
};

/// Draws n i.i.d. outcomes, calibrates on `score(outcome)`, and computes
/// the exact error P[score < tau].
template <typename Outcome, typename ScoreFn>
PacTrialResult pac_trial(const FiniteDistribution<Outcome>& dist, std::size_t n,
                         const RiskBudget& budget, std::uint64_t seed, ScoreFn&& score) {
  if (n == 0) throw std::domain_error("pac_trial requires n >= 1");
  std::mt19937_64 engine(seed);
  std::vector<CalibrationRecord> records(n);
  for (auto& r : records) r.true_score = score(dist.outcome(dist.sample_index(engine)));

  PacTrialResult out;
  out.threshold = calibrate_threshold(records, budget);
  const double tau = out.threshold.tau;
  out.true_error = true_error(dist, [&](const Outcome& o) { return score(o) < tau; });
  out.violated = out.true_error > budget.epsilon;
  return out;
}

PacTrialResult pac_trial(const ScoreDistribution& dist, std::size_t n, const RiskBudget& budget,
                         std::uint64_t seed);

struct McSummary {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double fraction = 0.0;
  /// 95% Clopper-Pearson interval on the violation probability.
  Interval interval;
  double mean_true_error = 0.0;
  std::size_t infeasible_trials = 0;
};

/// Runs `trials` independent jobs, job(i) returning its result; jobs run on
/// up to `threads` workers (0 = hardware concurrency) and results are
/// stored by index, so the output does not depend on scheduling.
template <typename Result, typename Job>
std::vector<Result> run_trials(std::size_t trials, unsigned threads, Job&& job) {
  std::vector<Result> results(trials);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(trials, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < trials; ++i) results[i] = job(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < trials; i = next++) results[i] = job(i);
    });
  }
  workers.clear();
  return results;
}

McSummary summarize(std::span<const PacTrialResult> results);

/// Monte Carlo check of the PAC guarantee: the fraction of calibration draws
/// whose exact error exceeds epsilon. Trial i uses derive_seed(base_seed, i).
McSummary mc_verify(const ScoreDistribution& dist, std::size_t n, const RiskBudget& budget,
                    std::size_t trials, std::uint64_t base_seed, unsigned threads = 0);

}  // namespace pacset
