// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowzero/error.hpp"

namespace flowzero {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kMaxFrames = 256;

// Normalized boxes may hang off the canvas by up to half a canvas on each
// side. Keeping the upper bound at 1.5 makes pixel-coordinate detection
// ("any value > 1.5") unambiguous for re-parsed documents.
inline constexpr double kBoxLowerBound = -0.5;
inline constexpr double kBoxUpperBound = 1.5;

enum class Direction {
  kLeft,
  kRight,
  kUp,
  kDown,
  kLeftUp,
  kLeftDown,
  kRightUp,
  kRightDown,
  kRandom,
};

inline constexpr std::array<Direction, 9> kAllDirections = {
    Direction::kLeft,    Direction::kRight,    Direction::kUp,
    Direction::kDown,    Direction::kLeftUp,   Direction::kLeftDown,
    Direction::kRightUp, Direction::kRightDown, Direction::kRandom};

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLeftUp: return "left_up";
    case Direction::kLeftDown: return "left_down";
    case Direction::kRightUp: return "right_up";
    case Direction::kRightDown: return "right_down";
    case Direction::kRandom: return "random";
  }
  return "random";
}

/// Accepts the canonical names, case-insensitively, with '-' or ' ' in
/// place of '_'.
inline std::optional<Direction> parse_direction(std::string_view text) {
  std::string key;
  key.reserve(text.size());
  for (char c : text) {
    if (c == '-' || c == ' ') c = '_';
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (Direction d : kAllDirections) {
    if (to_string(d) == key) return d;
  }
  return std::nullopt;
}

struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws RangeError unless the box has finite coordinates inside
/// [kBoxLowerBound, kBoxUpperBound] and strictly positive extent.
inline void validate_box(const BoundingBox& b, std::string_view what = "box") {
  const std::array<double, 4> v = {b.x1, b.y1, b.x2, b.y2};
  for (double c : v) {
    if (!std::isfinite(c)) {
      throw RangeError(std::string(what) + ": non-finite coordinate");
    }
    if (c < kBoxLowerBound || c > kBoxUpperBound) {
      throw RangeError(std::string(what) + ": coordinate " + std::to_string(c) +
                       " outside [-0.5, 1.5] after normalization");
    }
  }
  if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) {
    throw RangeError(std::string(what) + ": degenerate box (requires x1 < x2 and y1 < y2)");
  }
}

struct ScenePrompt {
  std::string text;
  int num_frames = 8;

  friend bool operator==(const ScenePrompt&, const ScenePrompt&) = default;
};

inline std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline void validate_prompt(const ScenePrompt& p) {
  if (trim(p.text).empty()) throw SchemaError("prompt text is empty");
  if (p.num_frames < 1 || p.num_frames > kMaxFrames) {
    throw RangeError("num_frames must be in [1, 256], got " + std::to_string(p.num_frames));
  }
}

struct LayoutEntry {
  std::string object;
  BoundingBox box;

  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

struct BackgroundMotion {
  Direction direction = Direction::kRandom;
  double speed = 0.0;

  friend bool operator==(const BackgroundMotion&, const BackgroundMotion&) = default;
};

struct FramePlan {
  int index = 0;
  std::string description;
  std::vector<LayoutEntry> layout;
  BackgroundMotion background;

  const LayoutEntry* find(std::string_view object) const {
    for (const auto& e : layout) {
      if (e.object == object) return &e;
    }
    return nullptr;
  }

  friend bool operator==(const FramePlan&, const FramePlan&) = default;
};

/// Per-frame plan for a whole video. Immutable by convention once validated.
struct DynamicSceneSyntax {
  ScenePrompt prompt;
  std::optional<std::array<double, 2>> canvas;  // [W, H] in pixels, informational
  std::vector<FramePlan> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }

  /// Object names in order of first appearance.
  std::vector<std::string> object_names() const {
    std::vector<std::string> names;
    for (const auto& f : frames) {
      for (const auto& e : f.layout) {
        if (std::find(names.begin(), names.end(), e.object) == names.end()) {
          names.push_back(e.object);
        }
      }
    }
    return names;
  }

  friend bool operator==(const DynamicSceneSyntax&, const DynamicSceneSyntax&) = default;
};

/// Checks every invariant of the model. Throws SchemaError or RangeError.
inline void validate(const DynamicSceneSyntax& dss) {
  validate_prompt(dss.prompt);
  if (dss.num_frames() != dss.prompt.num_frames) {
    throw SchemaError("frames has " + std::to_string(dss.num_frames()) +
                      " entries but num_frames is " + std::to_string(dss.prompt.num_frames));
  }
  for (std::size_t i = 0; i < dss.frames.size(); ++i) {
    const FramePlan& f = dss.frames[i];
    const std::string where = "frame " + std::to_string(i);
    if (f.index != static_cast<int>(i)) {
      throw SchemaError(where + ": index " + std::to_string(f.index) + " out of order");
    }
    if (trim(f.description).empty()) throw SchemaError(where + ": empty description");
    if (!std::isfinite(f.background.speed) || f.background.speed < 0.0 ||
        f.background.speed > 1.0) {
      throw RangeError(where + ": background speed " + std::to_string(f.background.speed) +
                       " outside [0, 1]");
    }
    for (std::size_t j = 0; j < f.layout.size(); ++j) {
      const LayoutEntry& e = f.layout[j];
      if (e.object.empty()) throw SchemaError(where + ": empty object name");
      for (std::size_t k = 0; k < j; ++k) {
        if (f.layout[k].object == e.object) {
          throw SchemaError(where + ": duplicate object \"" + e.object + "\"");
        }
      }
      validate_box(e.box, where + " object \"" + e.object + "\"");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON <-> model

namespace detail {

inline const ordered_json& require(const ordered_json& obj, const char* key,
                                   const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field \"" + key + "\"");
  return *it;
}

inline std::string require_string(const ordered_json& obj, const char* key,
                                  const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

inline double require_number(const ordered_json& obj, const char* key,
                             const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw SchemaError(where + ": field \"" + key + "\" must be a number");
  return v.get<double>();
}

inline std::array<double, 4> read_box(const ordered_json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4) {
    throw SchemaError(where + ": box must be an array of 4 numbers");
  }
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) throw SchemaError(where + ": box entries must be numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

}  // namespace detail

/// Parses a scene-syntax document. Boxes are normalized to canvas units when
/// any box coordinate exceeds 1.5, which requires a "canvas": [W, H] field.
inline DynamicSceneSyntax parse_dss_json(const ordered_json& doc) {
  using detail::require;
  if (!doc.is_object()) throw SchemaError("document must be a JSON object");

  DynamicSceneSyntax dss;
  dss.prompt.text = detail::require_string(doc, "prompt", "document");
  const auto& nf = require(doc, "num_frames", "document");
  if (!nf.is_number_integer()) throw SchemaError("document: num_frames must be an integer");
  const auto frames_requested = nf.get<long long>();
  if (frames_requested < 1 || frames_requested > kMaxFrames) {
    throw RangeError("num_frames must be in [1, 256], got " + std::to_string(frames_requested));
  }
  dss.prompt.num_frames = static_cast<int>(frames_requested);
  if (trim(dss.prompt.text).empty()) throw SchemaError("prompt text is empty");

  if (auto it = doc.find("canvas"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
      throw SchemaError("document: canvas must be [W, H]");
    }
    const double w = (*it)[0].get<double>();
    const double h = (*it)[1].get<double>();
    if (!(w > 0.0) || !(h > 0.0)) throw RangeError("canvas dimensions must be positive");
    dss.canvas = std::array<double, 2>{w, h};
  }

  const auto& frames = require(doc, "frames", "document");
  if (!frames.is_array()) throw SchemaError("document: frames must be an array");
  if (static_cast<long long>(frames.size()) != frames_requested) {
    throw SchemaError("frames has " + std::to_string(frames.size()) +
                      " entries but num_frames is " + std::to_string(frames_requested));
  }

  // First pass collects raw boxes so pixel detection sees the whole document.
  std::vector<std::vector<std::pair<std::string, std::array<double, 4>>>> raw(frames.size());
  bool pixel_units = false;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string where = "frame " + std::to_string(i);
    if (!f.is_object()) throw SchemaError(where + ": must be an object");

    FramePlan plan;
    const auto& idx = require(f, "index", where);
    if (!idx.is_number_integer()) throw SchemaError(where + ": index must be an integer");
    plan.index = static_cast<int>(idx.get<long long>());
    plan.description = detail::require_string(f, "description", where);

    const auto& bg = require(f, "background", where);
    if (!bg.is_object()) throw SchemaError(where + ": background must be an object");
    const std::string dir_text = detail::require_string(bg, "direction", where + " background");
    auto dir = parse_direction(dir_text);
    if (!dir) throw SchemaError(where + ": unknown background direction \"" + dir_text + "\"");
    plan.background.direction = *dir;
    plan.background.speed = detail::require_number(bg, "speed", where + " background");

    const auto& objs = require(f, "objects", where);
    if (!objs.is_array()) throw SchemaError(where + ": objects must be an array");
    for (const auto& o : objs) {
      if (!o.is_object()) throw SchemaError(where + ": object entries must be objects");
      auto name = detail::require_string(o, "name", where);
      auto box = detail::read_box(require(o, "box", where + " object \"" + name + "\""),
                                  where + " object \"" + name + "\"");
      for (double c : box) pixel_units = pixel_units || c > kBoxUpperBound;
      raw[i].emplace_back(std::move(name), box);
    }
    dss.frames.push_back(std::move(plan));
  }

  if (pixel_units && !dss.canvas) {
    throw SchemaError("box coordinates exceed 1.5 (pixel units) but no \"canvas\": [W, H] given");
  }
  const double sx = pixel_units ? (*dss.canvas)[0] : 1.0;
  const double sy = pixel_units ? (*dss.canvas)[1] : 1.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (auto& [name, b] : raw[i]) {
      dss.frames[i].layout.push_back(
          LayoutEntry{std::move(name), BoundingBox{b[0] / sx, b[1] / sy, b[2] / sx, b[3] / sy}});
    }
  }

  validate(dss);
  return dss;
}

inline DynamicSceneSyntax parse_dss(std::string_view json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SyntaxError(std::string("malformed JSON: ") + e.what());
  }
  return parse_dss_json(doc);
}

inline ordered_json to_json(const DynamicSceneSyntax& dss) {
  ordered_json doc;
  doc["prompt"] = dss.prompt.text;
  doc["num_frames"] = dss.prompt.num_frames;
  if (dss.canvas) doc["canvas"] = {(*dss.canvas)[0], (*dss.canvas)[1]};
  ordered_json frames = ordered_json::array();
  for (const auto& f : dss.frames) {
    ordered_json jf;
    jf["index"] = f.index;
    jf["description"] = f.description;
    ordered_json objs = ordered_json::array();
    for (const auto& e : f.layout) {
      ordered_json jo;
      jo["name"] = e.object;
      jo["box"] = {e.box.x1, e.box.y1, e.box.x2, e.box.y2};
      objs.push_back(std::move(jo));
    }
    jf["objects"] = std::move(objs);
    jf["background"] = {{"direction", std::string(to_string(f.background.direction))},
                        {"speed", f.background.speed}};
    frames.push_back(std::move(jf));
  }
  doc["frames"] = std::move(frames);
  return doc;
}

/// Canonical text form: fixed key order, two-space indent, shortest
/// round-trip decimal rendering of numbers.
inline std::string serialize_dss(const DynamicSceneSyntax& dss) { return to_json(dss).dump(2); }

/// Boxes of one object over every frame, `std::nullopt` where absent. Boxes
/// are kept un-clamped.
struct ObjectTrack {
  std::string object;
  std::vector<std::optional<BoundingBox>> boxes;

  std::size_t present_count() const {
    return static_cast<std::size_t>(
        std::count_if(boxes.begin(), boxes.end(), [](const auto& b) { return b.has_value(); }));
  }
  std::optional<std::size_t> first_present() const {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (boxes[i]) return i;
    }
    return std::nullopt;
  }
  std::optional<std::size_t> last_present() const {
    for (std::size_t i = boxes.size(); i-- > 0;) {
      if (boxes[i]) return i;
    }
    return std::nullopt;
  }

  friend bool operator==(const ObjectTrack&, const ObjectTrack&) = default;
};

inline ObjectTrack extract_track(const DynamicSceneSyntax& dss, std::string_view object) {
  ObjectTrack track{std::string(object), {}};
  track.boxes.reserve(dss.frames.size());
  for (const auto& f : dss.frames) {
    const LayoutEntry* e = f.find(object);
    track.boxes.push_back(e ? std::optional<BoundingBox>(e->box) : std::nullopt);
  }
  if (track.present_count() == 0) {
    throw NotFound("object \"" + std::string(object) + "\" does not appear in any frame");
  }
  return track;
}

}  // namespace flowzero
