#include "pacset/dump_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace pacset {

using nlohmann::json;

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

IntegrityError::IntegrityError(std::string id, const std::string& what)
    : std::runtime_error(what), id_(std::move(id)) {}

namespace {

struct LineReader {
  const json& obj;
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line, what); }

  const json& at(const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  bool has(const char* key) const { return obj.contains(key) && !obj.at(key).is_null(); }

  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  double real(const json& v, const std::string& key) const {
    if (!v.is_number()) fail("field '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail("field '" + key + "' must be finite");
    return x;
  }
  double real(const char* key) const { return real(at(key), key); }

  std::int64_t integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::size_t index(const char* key) const {
    const auto v = integer(key);
    if (v < 0) fail(std::string("field '") + key + "' must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  bool boolean(const char* key) const {
    const auto& v = at(key);
    if (!v.is_boolean()) fail(std::string("field '") + key + "' must be true or false");
    return v.get<bool>();
  }

  BoundingBox box(const json& v, std::size_t offset, const std::string& key) const {
    BoundingBox b{real(v.at(offset), key), real(v.at(offset + 1), key), real(v.at(offset + 2), key),
                  real(v.at(offset + 3), key)};
    if (!b.valid()) fail("field '" + key + "' is not a valid box");
    return b;
  }

  BoundingBox box(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array() || v.size() != 4) fail(std::string("field '") + key + "' must hold 4 numbers");
    return box(v, 0, key);
  }

  int class_label(int classes) const {
    const auto c = integer("class");
    if (c < 0 || c >= classes) fail("class " + std::to_string(c) + " outside the class set");
    return static_cast<int>(c);
  }
};

struct PendingPresence {
  std::size_t line;
  std::string image_id;
  ProposalClass key;
  double score;
};

struct PendingLocation {
  std::size_t line;
  std::string image_id;
  ProposalClass key;
  ScoredBox candidate;
};

struct PendingTruth {
  std::size_t line;
  std::string image_id;
  GroundTruth truth;
  std::optional<std::string> sequence;
  std::optional<std::int64_t> frame;
};

json box_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

}  // namespace

ParsedDump parse_dump(std::istream& in, ParseMode mode) {
  ParsedDump out;
  auto& images = out.dataset.images;
  std::map<std::string, std::size_t> by_id;
  std::vector<PendingPresence> presence;
  std::vector<PendingLocation> location;
  std::vector<PendingTruth> truths;
  bool header = false;

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "record must be a JSON object");
    const LineReader r{obj, line_no};
    const auto kind = r.str("kind");

    if (kind == "header") {
      if (header) r.fail("duplicate header");
      const auto version = r.integer("version");
      if (version != kDumpVersion) r.fail("unsupported dump version " + std::to_string(version));
      const auto classes = r.integer("classes");
      if (classes < 1 || classes > std::numeric_limits<int>::max()) r.fail("classes must be positive");
      out.dataset.num_classes = static_cast<int>(classes);
      header = true;
      continue;
    }
    if (!header) r.fail("the header record must come first");
    const int classes = out.dataset.num_classes;

    if (kind == "image") {
      ImageRecord image;
      image.image_id = r.str("image_id");
      if (by_id.count(image.image_id)) r.fail("duplicate image_id '" + image.image_id + "'");
      if (r.has("sequence")) image.sequence_id = r.str("sequence");
      if (r.has("frame")) image.frame_index = r.integer("frame");
      const auto& props = r.at("proposals");
      if (!props.is_array()) r.fail("field 'proposals' must be an array");
      for (const auto& p : props) {
        if (!p.is_array() || p.size() != 5) r.fail("each proposal must hold 5 numbers");
        const double score = r.real(p.at(4), "proposals");
        if (score < 0.0) r.fail("objectness score must be nonnegative");
        image.proposals.push_back({r.box(p, 0, "proposals"), score});
      }
      by_id.emplace(image.image_id, images.size());
      images.push_back(std::move(image));
    } else if (kind == "presence") {
      const double score = r.real("score");
      if (score < 0.0 || score > 1.0) r.fail("presence score outside [0, 1]");
      presence.push_back({line_no, r.str("image_id"), {r.index("proposal"), r.class_label(classes)}, score});
    } else if (kind == "location") {
      const double density = r.real("density");
      if (density < 0.0) r.fail("location density must be nonnegative");
      location.push_back({line_no, r.str("image_id"), {r.index("proposal"), r.class_label(classes)},
                          {r.box("box"), density}});
    } else if (kind == "truth") {
      PendingTruth t{line_no, r.str("image_id"), {}, std::nullopt, std::nullopt};
      t.truth.detection = {r.box("box"), r.class_label(classes), r.boolean("present")};
      if (r.has("object_id")) t.truth.object_id = r.integer("object_id");
      if (r.has("sequence")) t.sequence = r.str("sequence");
      if (r.has("frame")) t.frame = r.integer("frame");
      truths.push_back(std::move(t));
    } else {
      r.fail("unknown record kind '" + kind + "'");
    }
  }

  // Returns nullptr after counting a drop in lenient mode.
  auto resolve = [&](const std::string& id, std::optional<std::size_t> proposal, std::size_t line,
                     std::size_t& dropped) -> ImageRecord* {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      if (mode == ParseMode::Lenient) {
        ++dropped;
        return nullptr;
      }
      throw IntegrityError(id, "line " + std::to_string(line) + ": unknown image_id '" + id + "'");
    }
    ImageRecord& image = images[it->second];
    if (proposal && *proposal >= image.proposals.size()) {
      if (mode == ParseMode::Lenient) {
        ++dropped;
        return nullptr;
      }
      const auto ref = id + "#" + std::to_string(*proposal);
      throw IntegrityError(ref, "line " + std::to_string(line) + ": unknown proposal '" + ref + "'");
    }
    return &image;
  };

  for (const auto& p : presence) {
    auto* image = resolve(p.image_id, p.key.proposal, p.line, out.dropped.presence);
    if (!image) continue;
    if (!image->presence_scores.emplace(p.key, p.score).second) {
      throw ParseError(p.line, "duplicate presence score");
    }
  }
  for (const auto& l : location) {
    auto* image = resolve(l.image_id, l.key.proposal, l.line, out.dropped.location);
    if (image) image->location_candidates[l.key].push_back(l.candidate);
  }
  for (auto& t : truths) {
    auto* image = resolve(t.image_id, std::nullopt, t.line, out.dropped.truth);
    if (!image) continue;
    if (t.sequence) {
      if (image->sequence_id.empty()) image->sequence_id = *t.sequence;
      if (image->sequence_id != *t.sequence) throw ParseError(t.line, "truth sequence disagrees with its image");
    }
    if (t.frame) {
      if (!image->frame_index) image->frame_index = t.frame;
      if (*image->frame_index != *t.frame) throw ParseError(t.line, "truth frame disagrees with its image");
    }
    image->ground_truth.push_back(std::move(t.truth));
  }
  return out;
}

ParsedDump parse_dump_file(const std::filesystem::path& path, ParseMode mode) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  return parse_dump(in, mode);
}

void write_dump(std::ostream& out, const Dataset& dataset) {
  validate(dataset);
  out << json{{"kind", "header"}, {"version", kDumpVersion}, {"classes", dataset.num_classes}}.dump()
      << "\n";
  for (const auto& image : dataset.images) {
    json rec{{"kind", "image"}, {"image_id", image.image_id}};
    if (!image.sequence_id.empty()) rec["sequence"] = image.sequence_id;
    if (image.frame_index) rec["frame"] = *image.frame_index;
    json props = json::array();
    for (const auto& p : image.proposals) {
      props.push_back({p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max, p.score});
    }
    rec["proposals"] = std::move(props);
    out << rec.dump() << "\n";

    for (const auto& [key, score] : image.presence_scores) {
      out << json{{"kind", "presence"}, {"image_id", image.image_id}, {"proposal", key.proposal},
                  {"class", key.class_label}, {"score", score}}
                 .dump()
          << "\n";
    }
    for (const auto& [key, cands] : image.location_candidates) {
      for (const auto& c : cands) {
        out << json{{"kind", "location"}, {"image_id", image.image_id}, {"proposal", key.proposal},
                    {"class", key.class_label}, {"box", box_json(c.box)}, {"density", c.score}}
                   .dump()
            << "\n";
      }
    }
    for (const auto& gt : image.ground_truth) {
      json t{{"kind", "truth"}, {"image_id", image.image_id}, {"box", box_json(gt.detection.box)},
             {"class", gt.detection.class_label}, {"present", gt.detection.present}};
      if (gt.object_id) t["object_id"] = *gt.object_id;
      if (!image.sequence_id.empty()) t["sequence"] = image.sequence_id;
      if (image.frame_index) t["frame"] = *image.frame_index;
      out << t.dump() << "\n";
    }
  }
}

std::string serialize_dump(const Dataset& dataset) {
  std::ostringstream os;
  write_dump(os, dataset);
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void for_each_field(WorldConfig& c, Fn&& fn) {
  fn("n_sequences", c.n_sequences);
  fn("n_frames", c.n_frames);
  fn("n_objects", c.n_objects);
  fn("n_classes", c.n_classes);
  fn("arena_width", c.arena_width);
  fn("arena_height", c.arena_height);
  fn("box_width_min", c.box_width_min);
  fn("box_width_max", c.box_width_max);
  fn("size_levels", c.size_levels);
  fn("aspect", c.aspect);
  fn("motion_step", c.motion_step);
  fn("burst_probability", c.burst_probability);
  fn("group_probability", c.group_probability);
  fn("group_offset", c.group_offset);
  fn("score_sharpness", c.score_sharpness);
  fn("impostor_rate", c.impostor_rate);
  fn("box_jitter", c.box_jitter);
  fn("location_jitter", c.location_jitter);
  fn("drop_probability", c.drop_probability);
  fn("suppression_probability", c.suppression_probability);
  fn("proposals_per_object", c.proposals_per_object);
  fn("clutter_per_frame", c.clutter_per_frame);
  fn("location_decoys", c.location_decoys);
  fn("quantize", c.quantize);
  fn("grid", c.grid);
  fn("score_levels", c.score_levels);
  fn("seed", c.seed);
}

json parse_object(std::string_view text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  return j;
}

json threshold_json(const Threshold& t) {
  json j{{"epsilon", t.budget.epsilon}, {"delta", t.budget.delta}, {"n", t.n_calibration}};
  if (std::isinf(t.tau)) {
    j["tau"] = "inf";
  } else {
    j["tau"] = t.tau;
  }
  j["k_star"] = t.k_star_used ? json(*t.k_star_used) : json(nullptr);
  return j;
}

Threshold threshold_from(const json& j) {
  Threshold t;
  const auto& tau = j.at("tau");
  t.tau = tau.is_string() && tau.get<std::string>() == "inf" ? kEmptySetTau : tau.get<double>();
  t.budget = {j.at("epsilon").get<double>(), j.at("delta").get<double>()};
  t.n_calibration = j.at("n").get<std::size_t>();
  if (!j.at("k_star").is_null()) t.k_star_used = j.at("k_star").get<std::uint64_t>();
  if (std::isnan(t.tau) || t.tau < 0.0) throw std::invalid_argument("threshold must be nonnegative");
  return t;
}

json composed_json(const ComposedBudget& b) {
  return {{"epsilon", b.epsilon}, {"delta", b.delta}, {"degenerate", b.degenerate()}};
}

}  // namespace

WorldConfig parse_world_config(std::string_view json_text) {
  const auto j = parse_object(json_text, "world config");
  WorldConfig config;
  std::size_t used = 0;
  for_each_field(config, [&](const char* name, auto& field) {
    auto it = j.find(name);
    if (it == j.end()) return;
    ++used;
    using T = std::remove_reference_t<decltype(field)>;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        field = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("not an integer");
        field = it->template get<T>();
      } else {
        if (!it->is_number()) throw std::invalid_argument("not a number");
        field = it->template get<T>();
      }
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("world config: bad value for '") + name + "'");
    }
  });
  if (used != j.size()) {
    WorldConfig probe;
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for_each_field(probe, [&](const char* name, auto&) { known = known || key == name; });
      if (!known) throw std::invalid_argument("world config: unknown field '" + key + "'");
    }
  }
  validate(config);
  return config;
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  return parse_world_config(read_text_file(path));
}

std::string world_config_to_json(const WorldConfig& config) {
  json j = json::object();
  WorldConfig copy = config;
  for_each_field(copy, [&](const char* name, auto& field) { j[name] = field; });
  return j.dump(2) + "\n";
}

std::string detector_thresholds_to_json(const DetectorThresholds& t) {
  json j{{"kind", "detector-thresholds"},
         {"mode", t.mode == CompositionMode::StrictChain ? "strict" : "shared"},
         {"proposal", threshold_json(t.proposal)},
         {"presence", threshold_json(t.presence)},
         {"location", threshold_json(t.location)},
         {"presence_given_proposal", composed_json(t.presence_given_proposal)},
         {"location_given_proposal", composed_json(t.location_given_proposal)},
         {"detection", composed_json(t.detection())},
         {"proposal_error_floor", t.proposal_error_floor}};
  return j.dump(2) + "\n";
}

DetectorThresholds detector_thresholds_from_json(std::string_view json_text) {
  const auto j = parse_object(json_text, "detector thresholds");
  try {
    if (j.at("kind") != "detector-thresholds") throw std::invalid_argument("wrong kind");
    const auto mode_name = j.at("mode").get<std::string>();
    if (mode_name != "strict" && mode_name != "shared") throw std::invalid_argument("bad mode");
    const auto mode = mode_name == "strict" ? CompositionMode::StrictChain : CompositionMode::SharedEvent;
    const auto prp = threshold_from(j.at("proposal"));
    const auto prs = threshold_from(j.at("presence"));
    const auto loc = threshold_from(j.at("location"));
    auto t = DetectorThresholds::fixed(0, 0, 0, {prp.budget, prs.budget, loc.budget}, mode);
    t.proposal = prp;
    t.presence = prs;
    t.location = loc;
    t.proposal_error_floor = j.value("proposal_error_floor", 0.0);
    return t;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("detector thresholds: ") + e.what());
  }
}

std::string edge_threshold_to_json(const EdgeThreshold& t) {
  json j{{"kind", "edge-threshold"}, {"edge", threshold_json(t.tau)}, {"excluded", t.excluded}};
  return j.dump(2) + "\n";
}

EdgeThreshold edge_threshold_from_json(std::string_view json_text) {
  const auto j = parse_object(json_text, "edge threshold");
  try {
    if (j.at("kind") != "edge-threshold") throw std::invalid_argument("wrong kind");
    EdgeThreshold t;
    t.tau = threshold_from(j.at("edge"));
    t.budget = t.tau.budget;
    t.excluded = j.value("excluded", std::size_t{0});
    return t;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("edge threshold: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
  if (!out) throw FileError("write failed for " + path.string());
}

}  // namespace pacset
