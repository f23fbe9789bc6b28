#include "pacset/simulator.hpp"

#include <cmath>
#include <string>

namespace pacset {

namespace {

void require(bool ok, const char* field) {
  if (!ok) throw std::domain_error(std::string("world config: invalid ") + field);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

struct Walker {
  double x = 0.0;  // top-left corner
  double y = 0.0;
  double width = 0.0;
  int class_label = 0;
  int leader = -1;  // index of the object this one walks beside
};

class WorldBuilder {
 public:
  explicit WorldBuilder(const WorldConfig& c) : cfg_(c), engine_(c.seed) {}

  Dataset build() {
    Dataset out;
    out.num_classes = cfg_.n_classes;
    for (int s = 0; s < cfg_.n_sequences; ++s) {
      spawn();
      const std::string sequence = "seq" + std::to_string(s);
      for (int t = 0; t < cfg_.n_frames; ++t) {
        if (t > 0) step();
        out.images.push_back(render(sequence, t));
      }
    }
    return out;
  }

 private:
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(engine_); }
  bool chance(double p) { return uniform01(engine_) < p; }

  double snap(double v) const {
    return cfg_.quantize && cfg_.grid > 0.0 ? std::round(v / cfg_.grid) * cfg_.grid : v;
  }

  double quantize_score(double s) const {
    if (!cfg_.quantize) return s;
    return std::clamp(std::round(s * cfg_.score_levels) / cfg_.score_levels, 0.0, 1.0);
  }

  double box_width() {
    if (cfg_.size_levels <= 1) return snap(cfg_.box_width_min);
    const int j = static_cast<int>(std::min<double>(cfg_.size_levels - 1,
                                                    std::floor(uniform01(engine_) * cfg_.size_levels)));
    return snap(cfg_.box_width_min +
                (cfg_.box_width_max - cfg_.box_width_min) * j / (cfg_.size_levels - 1));
  }

  // Offset along one axis, bounded by `scale`.
  double displacement(double scale) {
    if (scale <= 0.0) return 0.0;
    if (cfg_.quantize) {
      const double u = uniform01(engine_);
      return u < 1.0 / 3.0 ? -scale : (u < 2.0 / 3.0 ? 0.0 : scale);
    }
    return uniform(-scale, scale);
  }

  void place_randomly(Walker& w) {
    const double h = w.width * cfg_.aspect;
    w.x = snap(uniform(0.0, std::max(0.0, cfg_.arena_width - w.width)));
    w.y = snap(uniform(0.0, std::max(0.0, cfg_.arena_height - h)));
  }

  // Random position whose box passes `clear` against every other walker;
  // gives up after a bounded number of draws and keeps the last one.
  template <typename Clear>
  void place_clear(Walker& w, const Walker* self, Clear&& clear) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      place_randomly(w);
      const auto b = box_of(w);
      bool ok = true;
      for (const auto& o : walkers_) {
        if (&o == self || o.width <= 0.0) continue;
        if (!clear(b, box_of(o))) {
          ok = false;
          break;
        }
      }
      if (ok) return;
    }
  }

  static bool disjoint(const BoundingBox& a, const BoundingBox& b) { return iou(a, b) == 0.0; }
  static bool distinct(const BoundingBox& a, const BoundingBox& b) { return !same_box(a, b); }

  void spawn() {
    walkers_.assign(static_cast<std::size_t>(cfg_.n_objects), {});
    for (std::size_t i = 0; i < walkers_.size(); ++i) {
      auto& w = walkers_[i];
      if (i > 0 && chance(cfg_.group_probability)) {
        const auto& lead = walkers_[i - 1];
        w = lead;
        w.leader = static_cast<int>(i - 1);
        w.x = lead.x + cfg_.group_offset;
        continue;
      }
      w.width = box_width();
      w.class_label = static_cast<int>(std::floor(uniform01(engine_) * cfg_.n_classes));
      w.class_label = std::min(w.class_label, cfg_.n_classes - 1);
      place_clear(w, &w, disjoint);
    }
    first_id_ = next_id_;
    next_id_ += static_cast<std::int64_t>(walkers_.size());
  }

  void step() {
    for (auto& w : walkers_) {
      if (w.leader >= 0) {
        const auto& lead = walkers_[static_cast<std::size_t>(w.leader)];
        w.x = lead.x + cfg_.group_offset;
        w.y = lead.y;
        continue;
      }
      if (chance(cfg_.burst_probability)) {
        place_clear(w, &w, disjoint);
        continue;
      }
      const double h = w.width * cfg_.aspect;
      double dx = displacement(cfg_.motion_step);
      double dy = displacement(cfg_.motion_step);
      if (w.x + dx < 0.0 || w.x + w.width + dx > cfg_.arena_width) dx = -dx;
      if (w.y + dy < 0.0 || w.y + h + dy > cfg_.arena_height) dy = -dy;
      w.x += dx;
      w.y += dy;
    }
  }

  BoundingBox box_of(const Walker& w) const {
    return {w.x, w.y, w.x + w.width, w.y + w.width * cfg_.aspect};
  }

  BoundingBox jittered(const BoundingBox& b, double scale) {
    BoundingBox out{snap(b.x_min + displacement(scale)), snap(b.y_min + displacement(scale)),
                    snap(b.x_max + displacement(scale)), snap(b.y_max + displacement(scale))};
    if (out.x_max < out.x_min) std::swap(out.x_min, out.x_max);
    if (out.y_max < out.y_min) std::swap(out.y_min, out.y_max);
    return out;
  }

  double true_score() {
    const double u = 1.0 - uniform01(engine_);  // (0, 1]
    return quantize_score(1.0 - std::pow(1.0 - u, 1.0 + cfg_.score_sharpness));
  }

  double impostor_score() { return quantize_score(cfg_.impostor_rate * uniform01(engine_)); }

  ImageRecord render(const std::string& sequence, int t) {
    ImageRecord image;
    image.image_id = sequence + "/" + std::to_string(t);
    image.sequence_id = sequence;
    image.frame_index = t;

    // origin[i]: index of the walker proposal i was cut from, -1 for clutter.
    std::vector<int> origin;
    for (std::size_t i = 0; i < walkers_.size(); ++i) {
      const auto& w = walkers_[i];
      const auto truth = box_of(w);
      image.ground_truth.push_back(
          {{truth, w.class_label, true}, first_id_ + static_cast<std::int64_t>(i)});
      if (chance(cfg_.drop_probability)) continue;
      for (int j = 0; j < cfg_.proposals_per_object; ++j) {
        image.proposals.push_back({jittered(truth, cfg_.box_jitter), true_score()});
        origin.push_back(static_cast<int>(i));
      }
    }
    std::poisson_distribution<int> clutter(std::max(0.0, cfg_.clutter_per_frame));
    const int n_clutter = cfg_.clutter_per_frame > 0.0 ? clutter(engine_) : 0;
    for (int j = 0; j < n_clutter; ++j) {
      Walker w;
      w.width = box_width();
      place_clear(w, nullptr, distinct);
      image.proposals.push_back({box_of(w), impostor_score()});
      origin.push_back(-1);
    }

    for (std::size_t r = 0; r < image.proposals.size(); ++r) {
      const Walker* source = origin[r] >= 0 ? &walkers_[static_cast<std::size_t>(origin[r])] : nullptr;
      for (int c = 0; c < cfg_.n_classes; ++c) {
        const bool own = source && source->class_label == c;
        const double presence = own ? true_score() : impostor_score();
        if (!chance(cfg_.suppression_probability)) image.presence_scores[{r, c}] = presence;

        auto& cands = image.location_candidates[{r, c}];
        if (!own) {
          cands.push_back({image.proposals[r].box, impostor_score()});
          continue;
        }
        const auto truth = box_of(*source);
        cands.push_back({jittered(truth, cfg_.location_jitter), true_score()});
        for (int d = 0; d < cfg_.location_decoys; ++d) {
          const double shift = (d % 2 == 0 ? 1.0 : -1.0) * (truth.width() * (1 + d / 2) + cfg_.grid);
          cands.push_back({truth.translated(shift, 0.0), impostor_score()});
        }
      }
    }
    return image;
  }

  const WorldConfig& cfg_;
  std::mt19937_64 engine_;
  std::vector<Walker> walkers_;
  std::int64_t next_id_ = 0;
  std::int64_t first_id_ = 0;
};

}  // namespace

void validate(const WorldConfig& c) {
  require(c.n_sequences >= 1, "n_sequences");
  require(c.n_frames >= 1, "n_frames");
  require(c.n_objects >= 0, "n_objects");
  require(c.n_classes >= 1, "n_classes");
  require(c.arena_width > 0.0 && c.arena_height > 0.0, "arena dimensions");
  require(c.box_width_min > 0.0 && c.box_width_max >= c.box_width_min, "box widths");
  require(c.size_levels >= 1, "size_levels");
  require(c.aspect > 0.0, "aspect");
  require(c.motion_step >= 0.0, "motion_step");
  require(probability(c.burst_probability), "burst_probability");
  require(probability(c.group_probability), "group_probability");
  require(std::isfinite(c.group_offset), "group_offset");
  require(c.score_sharpness >= 0.0, "score_sharpness");
  require(probability(c.impostor_rate), "impostor_rate");
  require(c.box_jitter >= 0.0, "box_jitter");
  require(c.location_jitter >= 0.0, "location_jitter");
  require(probability(c.drop_probability), "drop_probability");
  require(probability(c.suppression_probability), "suppression_probability");
  require(c.proposals_per_object >= 0, "proposals_per_object");
  require(c.clutter_per_frame >= 0.0, "clutter_per_frame");
  require(c.location_decoys >= 0, "location_decoys");
  require(c.grid >= 0.0, "grid");
  require(c.score_levels >= 1, "score_levels");
}

Dataset gen_world(const WorldConfig& config) {
  validate(config);
  return WorldBuilder(config).build();
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

double uniform01(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

ScoreDistribution make_score_distribution(std::size_t support, int levels, std::uint64_t seed) {
  if (support == 0 || levels < 1) throw std::domain_error("score distribution needs support and levels");
  std::mt19937_64 engine(seed);
  std::vector<CalibrationRecord> scores(support);
  std::vector<double> weights(support);
  for (std::size_t i = 0; i < support; ++i) {
    // Skewed toward high scores, snapped to a grid so that ties occur.
    const double u = uniform01(engine);
    scores[i].true_score = std::round(std::sqrt(u) * levels) / levels;
    weights[i] = 0.5 + uniform01(engine);
  }
  return ScoreDistribution(std::move(scores), std::move(weights));
}

PacTrialResult pac_trial(const ScoreDistribution& dist, std::size_t n, const RiskBudget& budget,
                         std::uint64_t seed) {
  return pac_trial(dist, n, budget, seed, [](const CalibrationRecord& r) { return r.true_score; });
}

McSummary summarize(std::span<const PacTrialResult> results) {
  McSummary s;
  s.trials = results.size();
  if (s.trials == 0) return s;
  double error_sum = 0.0;
  for (const auto& r : results) {
    s.violations += r.violated ? 1 : 0;
    s.infeasible_trials += r.threshold.infeasible() ? 1 : 0;
    error_sum += r.true_error;
  }
  s.fraction = static_cast<double>(s.violations) / static_cast<double>(s.trials);
  s.interval = clopper_pearson(s.violations, s.trials);
  s.mean_true_error = error_sum / static_cast<double>(s.trials);
  return s;
}

McSummary mc_verify(const ScoreDistribution& dist, std::size_t n, const RiskBudget& budget,
                    std::size_t trials, std::uint64_t base_seed, unsigned threads) {
  if (trials == 0) throw std::domain_error("mc_verify requires at least one trial");
  const auto results = run_trials<PacTrialResult>(trials, threads, [&](std::size_t i) {
    return pac_trial(dist, n, budget, derive_seed(base_seed, i));
  });
  return summarize(results);
}

}  // namespace pacset
