#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pacset/detection.hpp"
#include "pacset/simulator.hpp"
#include "pacset/tracking.hpp"

namespace pacset {

// Dump format: one JSON object per line.
//
//   {"kind":"header","version":1,"classes":2}
//   {"kind":"image","image_id":"a","sequence":"s","frame":0,
//    "proposals":[[x0,y0,x1,y1,score],...]}
//   {"kind":"presence","image_id":"a","proposal":0,"class":1,"score":0.9}
//   {"kind":"location","image_id":"a","proposal":0,"class":1,
//    "box":[x0,y0,x1,y1],"density":0.8}
//   {"kind":"truth","image_id":"a","box":[x0,y0,x1,y1],"class":1,
//    "present":true,"object_id":3,"sequence":"s","frame":0}
//
// The header must come first whenever the file holds any record. Blank
// lines are ignored. Records may reference images defined later in the
// file; references are resolved once the whole stream has been read.

inline constexpr int kDumpVersion = 1;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A record refers to an image or proposal that does not exist.
class IntegrityError : public std::runtime_error {
 public:
  IntegrityError(std::string id, const std::string& what);
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// A file could not be opened, read or written.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParseMode { Strict, Lenient };

/// Records dropped in lenient mode.
struct DroppedCounts {
  std::size_t presence = 0;
  std::size_t location = 0;
  std::size_t truth = 0;

  std::size_t total() const noexcept { return presence + location + truth; }
};

struct ParsedDump {
  Dataset dataset;
  DroppedCounts dropped;
};

ParsedDump parse_dump(std::istream& in, ParseMode mode = ParseMode::Strict);
ParsedDump parse_dump_file(const std::filesystem::path& path, ParseMode mode = ParseMode::Strict);

/// Reals are written with round-trip precision.
void write_dump(std::ostream& out, const Dataset& dataset);
std::string serialize_dump(const Dataset& dataset);

/// JSON object whose keys are WorldConfig field names; missing keys keep
/// their defaults and unknown keys are rejected with std::invalid_argument.
WorldConfig parse_world_config(std::string_view json_text);
WorldConfig load_world_config(const std::filesystem::path& path);
std::string world_config_to_json(const WorldConfig& config);

std::string detector_thresholds_to_json(const DetectorThresholds& thresholds);
DetectorThresholds detector_thresholds_from_json(std::string_view json_text);
std::string edge_threshold_to_json(const EdgeThreshold& threshold);
EdgeThreshold edge_threshold_from_json(std::string_view json_text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace pacset
