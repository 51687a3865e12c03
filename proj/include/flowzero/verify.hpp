// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowzero/bench_case.hpp"
#include "flowzero/dss.hpp"

namespace flowzero {

/// Rule thresholds. All are overridable from the CLI.
struct VerifyThresholds {
  double min_disp = 0.05;              // centroid travel, canvas units
  double ratio_threshold = 1.2;        // area ratio for grow / shrink
  double visibility_tolerance = 0.1;   // band around the visible-fraction target
};

struct RuleReport {
  Task task = Task::kObjects;
  bool passed = false;
  double measured = 0.0;
  std::string detail;

  friend bool operator==(const RuleReport&, const RuleReport&) = default;
};

inline ordered_json to_json(const RuleReport& r) {
  return ordered_json{{"task", std::string(to_string(r.task))},
                      {"passed", r.passed},
                      {"measured", r.measured},
                      {"detail", r.detail}};
}

struct FeedbackReport {
  std::string analysis;
  std::vector<std::string> suggestions;
  int confidence = 1;

  friend bool operator==(const FeedbackReport&, const FeedbackReport&) = default;
};

inline ordered_json to_json(const FeedbackReport& f) {
  return ordered_json{
      {"analysis", f.analysis}, {"suggestions", f.suggestions}, {"confidence", f.confidence}};
}

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string point(double x, double y) { return "(" + fmt2(x) + ", " + fmt2(y) + ")"; }

inline void require_two_present(const ObjectTrack& track) {
  if (track.present_count() < 2) {
    throw InsufficientTrack("object \"" + track.object + "\" is present in " +
                            std::to_string(track.present_count()) +
                            " frame(s); at least 2 are needed");
  }
}

}  // namespace detail

/// Centroid of the last present box minus centroid of the first present box.
inline std::pair<double, double> centroid_displacement(const ObjectTrack& track) {
  detail::require_two_present(track);
  const BoundingBox& a = *track.boxes[*track.first_present()];
  const BoundingBox& b = *track.boxes[*track.last_present()];
  return {b.center_x() - a.center_x(), b.center_y() - a.center_y()};
}

/// Endpoint-based motion label. The dominant axis must travel at least
/// `min_disp` while the other axis stays under `min_disp / 2`. y grows
/// downward, so positive dy is "down".
inline MotionLabel detect_movement(const ObjectTrack& track, double min_disp = 0.05) {
  if (!(min_disp > 0.0 && min_disp < 1.0)) throw RangeError("min_disp must be in (0, 1)");
  const auto [dx, dy] = centroid_displacement(track);
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  if (ax > ay) {
    if (ax >= min_disp && ay < 0.5 * min_disp) return dx > 0 ? MotionLabel::kRight : MotionLabel::kLeft;
  } else if (ay > ax) {
    if (ay >= min_disp && ax < 0.5 * min_disp) return dy > 0 ? MotionLabel::kDown : MotionLabel::kUp;
  }
  return MotionLabel::kNone;
}

/// area(last present) / area(first present).
inline double area_ratio(const ObjectTrack& track) {
  detail::require_two_present(track);
  return track.boxes[*track.last_present()]->area() / track.boxes[*track.first_present()]->area();
}

inline SizeTrend detect_size_trend(const ObjectTrack& track, double ratio_threshold = 1.2) {
  if (!(ratio_threshold > 1.0)) throw RangeError("ratio_threshold must be > 1");
  detail::require_two_present(track);
  const double first = track.boxes[*track.first_present()]->area();
  const double last = track.boxes[*track.last_present()]->area();
  // Both directions are tested as a quotient >= threshold so that reversing
  // a track swaps grow and shrink exactly.
  if (last / first >= ratio_threshold) return SizeTrend::kGrow;
  if (first / last >= ratio_threshold) return SizeTrend::kShrink;
  return SizeTrend::kConstant;
}

/// Share of the box area that lies inside the unit canvas.
inline double visible_fraction(const BoundingBox& box) {
  const double area = box.area();
  if (!std::isfinite(area) || !(box.x2 > box.x1) || !(box.y2 > box.y1)) {
    throw DegenerateBox("box has no positive area");
  }
  const double ix = std::max(0.0, std::min(box.x2, 1.0) - std::max(box.x1, 0.0));
  const double iy = std::max(0.0, std::min(box.y2, 1.0) - std::max(box.y1, 0.0));
  return std::clamp(ix * iy / area, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rule checks

/// Per-frame recall of the expected objects over all frames.
inline RuleReport check_objects(const DynamicSceneSyntax& dss,
                                const std::vector<std::string>& expected) {
  RuleReport r;
  r.task = Task::kObjects;
  if (expected.empty() || dss.frames.empty()) {
    r.detail = "nothing to check";
    return r;
  }
  std::size_t hits = 0;
  std::vector<std::string> missing;
  for (const auto& name : expected) {
    std::size_t present = 0;
    for (const auto& f : dss.frames) present += f.find(name) ? 1 : 0;
    hits += present;
    if (present < dss.frames.size()) {
      missing.push_back(name + " (" + std::to_string(present) + "/" +
                        std::to_string(dss.frames.size()) + " frames)");
    }
  }
  r.measured = static_cast<double>(hits) / static_cast<double>(expected.size() * dss.frames.size());
  r.passed = missing.empty();
  if (r.passed) {
    r.detail = "all expected objects present in every frame";
  } else {
    r.detail = "missing:";
    for (const auto& m : missing) r.detail += " " + m;
  }
  return r;
}

inline std::optional<ObjectTrack> find_track(const DynamicSceneSyntax& dss, const std::string& name) {
  try {
    return extract_track(dss, name);
  } catch (const NotFound&) {
    return std::nullopt;
  }
}

/// measured = signed centroid travel along the target axis (positive when
/// the object moves the expected way).
inline RuleReport check_movement(const DynamicSceneSyntax& dss, const MovementTarget& target,
                                 const VerifyThresholds& th = {}) {
  RuleReport r;
  r.task = Task::kMovement;
  auto track = find_track(dss, target.object);
  if (!track || track->present_count() < 2) {
    r.detail = "\"" + target.object + "\" is present in fewer than 2 frames";
    return r;
  }
  const auto [dx, dy] = centroid_displacement(*track);
  const MotionLabel label = detect_movement(*track, th.min_disp);
  switch (target.label) {
    case MotionLabel::kLeft: r.measured = -dx; break;
    case MotionLabel::kRight: r.measured = dx; break;
    case MotionLabel::kUp: r.measured = -dy; break;
    case MotionLabel::kDown: r.measured = dy; break;
    case MotionLabel::kNone: r.measured = std::hypot(dx, dy); break;
  }
  r.passed = label == target.label;
  r.detail = "detected " + std::string(to_string(label)) + ", expected " +
             std::string(to_string(target.label)) + " (dx " + detail::fmt2(dx) + ", dy " +
             detail::fmt2(dy) + ")";
  return r;
}

/// measured = area ratio last / first.
inline RuleReport check_size(const DynamicSceneSyntax& dss, const SizeTarget& target,
                             const VerifyThresholds& th = {}) {
  RuleReport r;
  r.task = Task::kSize;
  auto track = find_track(dss, target.object);
  if (!track || track->present_count() < 2) {
    r.detail = "\"" + target.object + "\" is present in fewer than 2 frames";
    return r;
  }
  r.measured = area_ratio(*track);
  const SizeTrend trend = detect_size_trend(*track, th.ratio_threshold);
  r.passed = trend == target.trend;
  r.detail = "detected " + std::string(to_string(trend)) + ", expected " +
             std::string(to_string(target.trend)) + " (area ratio " + detail::fmt2(r.measured) + ")";
  return r;
}

/// Judged on the final frame only. measured = visible fraction there.
inline RuleReport check_visibility(const DynamicSceneSyntax& dss, const VisibilityTarget& target,
                                   const VerifyThresholds& th = {}) {
  RuleReport r;
  r.task = Task::kVisibility;
  if (dss.frames.empty()) return r;
  const LayoutEntry* e = dss.frames.back().find(target.object);
  if (!e) {
    r.detail = "\"" + target.object + "\" is absent from the final frame";
    return r;
  }
  r.measured = visible_fraction(e->box);
  r.passed = std::abs(r.measured - target.fraction) <= th.visibility_tolerance + 1e-12;
  r.detail = "final-frame visible fraction " + detail::fmt2(r.measured) + ", target " +
             detail::fmt2(target.fraction) + " +/- " + detail::fmt2(th.visibility_tolerance);
  return r;
}

/// Dispatches to the rule for the case's task.
inline RuleReport score_case(const BenchCase& c, const DynamicSceneSyntax& dss,
                             const VerifyThresholds& th = {}) {
  return std::visit(
      [&](const auto& e) -> RuleReport {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ObjectsTarget>) {
          return check_objects(dss, e.names);
        } else if constexpr (std::is_same_v<T, MovementTarget>) {
          return check_movement(dss, e, th);
        } else if constexpr (std::is_same_v<T, SizeTarget>) {
          return check_size(dss, e, th);
        } else {
          return check_visibility(dss, e, th);
        }
      },
      c.expectation);
}

// ---------------------------------------------------------------------------
// Deterministic feedback

/// One failed or passed rule with a coordinate-level repair hint.
struct RuleCheck {
  std::string name;
  bool passed = false;
  std::string suggestion;
};

namespace detail {

inline RuleCheck presence_check(const DynamicSceneSyntax& dss, const std::string& object,
                                bool final_frame_only) {
  RuleCheck c{"presence of \"" + object + "\"", true, {}};
  std::vector<int> missing;
  for (const auto& f : dss.frames) {
    if (final_frame_only && f.index + 1 != dss.num_frames()) continue;
    if (!f.find(object)) missing.push_back(f.index);
  }
  if (missing.empty()) return c;
  c.passed = false;
  std::string frames;
  for (int i : missing) frames += (frames.empty() ? "" : ", ") + std::to_string(i);
  c.suggestion = "Add \"" + object + "\" to frame(s) " + frames +
                 " with a box continuing its trajectory from the neighbouring frames.";
  return c;
}

inline std::string motion_hint(MotionLabel label, double min_disp) {
  switch (label) {
    case MotionLabel::kLeft: return "x should decrease by at least " + fmt2(min_disp);
    case MotionLabel::kRight: return "x should increase by at least " + fmt2(min_disp);
    case MotionLabel::kUp: return "y should decrease by at least " + fmt2(min_disp);
    case MotionLabel::kDown: return "y should increase by at least " + fmt2(min_disp);
    case MotionLabel::kNone: return "the centroid should stay within " + fmt2(min_disp);
  }
  return {};
}

}  // namespace detail

/// Every rule applicable to the case, in a fixed order.
inline std::vector<RuleCheck> rule_checks(const DynamicSceneSyntax& dss, const BenchCase& c,
                                          const VerifyThresholds& th = {}) {
  std::vector<RuleCheck> checks;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ObjectsTarget>) {
          for (const auto& name : e.names) checks.push_back(detail::presence_check(dss, name, false));
        } else if constexpr (std::is_same_v<T, MovementTarget>) {
          checks.push_back(detail::presence_check(dss, e.object, false));
          RuleReport r = check_movement(dss, e, th);
          RuleCheck m{"movement of \"" + e.object + "\"", r.passed, {}};
          if (!r.passed) {
            auto track = find_track(dss, e.object);
            if (track && track->present_count() >= 2) {
              const auto& a = *track->boxes[*track->first_present()];
              const auto& b = *track->boxes[*track->last_present()];
              m.suggestion = "\"" + e.object + "\" moves from centroid " +
                             detail::point(a.center_x(), a.center_y()) + " in frame " +
                             std::to_string(*track->first_present()) + " to " +
                             detail::point(b.center_x(), b.center_y()) + " in frame " +
                             std::to_string(*track->last_present()) + "; to move " +
                             std::string(to_string(e.label)) + ", " +
                             detail::motion_hint(e.label, th.min_disp) +
                             " while the other axis stays within " + detail::fmt2(0.5 * th.min_disp) + ".";
            } else {
              m.suggestion = "Give \"" + e.object + "\" a box in at least two frames so its motion is defined.";
            }
          }
          checks.push_back(std::move(m));
        } else if constexpr (std::is_same_v<T, SizeTarget>) {
          checks.push_back(detail::presence_check(dss, e.object, false));
          RuleReport r = check_size(dss, e, th);
          RuleCheck s{"size of \"" + e.object + "\"", r.passed, {}};
          if (!r.passed) {
            auto track = find_track(dss, e.object);
            if (track && track->present_count() >= 2) {
              const double a = track->boxes[*track->first_present()]->area();
              const double b = track->boxes[*track->last_present()]->area();
              const std::string want = e.trend == SizeTrend::kGrow ? "at least " + detail::fmt2(th.ratio_threshold) + "x larger"
                                       : e.trend == SizeTrend::kShrink ? "at least " + detail::fmt2(th.ratio_threshold) + "x smaller"
                                                                       : "within a factor " + detail::fmt2(th.ratio_threshold);
              s.suggestion = "\"" + e.object + "\" area goes from " + detail::fmt2(a) + " in frame " +
                             std::to_string(*track->first_present()) + " to " + detail::fmt2(b) +
                             " in frame " + std::to_string(*track->last_present()) +
                             " (ratio " + detail::fmt2(b / a) + "); the final box should be " + want + ".";
            } else {
              s.suggestion = "Give \"" + e.object + "\" a box in at least two frames so its size change is defined.";
            }
          }
          checks.push_back(std::move(s));
        } else {
          checks.push_back(detail::presence_check(dss, e.object, true));
          RuleReport r = check_visibility(dss, e, th);
          RuleCheck v{"visibility of \"" + e.object + "\"", r.passed, {}};
          if (!r.passed) {
            const LayoutEntry* last = dss.frames.empty() ? nullptr : dss.frames.back().find(e.object);
            if (last) {
              const auto& b = last->box;
              v.suggestion = "In the final frame \"" + e.object + "\" has box [" + detail::fmt2(b.x1) + ", " +
                             detail::fmt2(b.y1) + ", " + detail::fmt2(b.x2) + ", " + detail::fmt2(b.y2) +
                             "] with visible fraction " + detail::fmt2(r.measured) +
                             "; shift it across the canvas edge so that " + detail::fmt2(e.fraction) +
                             " of its area lies inside [0, 1].";
            } else {
              v.suggestion = "Place \"" + e.object + "\" in the final frame, partly outside the canvas.";
            }
          }
          checks.push_back(std::move(v));
        }
      },
      c.expectation);
  return checks;
}

/// Confidence mapping for the rule-based verifier: 5 when every rule
/// passes, otherwise max(1, 4 - failed). A single failure therefore never
/// exceeds the default threshold of 3.
inline int confidence_from_failures(std::size_t failed) {
  if (failed == 0) return 5;
  return std::max(1, 4 - static_cast<int>(failed));
}

inline FeedbackReport local_feedback(const DynamicSceneSyntax& dss, const BenchCase& c,
                                     const VerifyThresholds& th = {}) {
  const auto checks = rule_checks(dss, c, th);
  FeedbackReport fb;
  std::size_t failed = 0;
  for (const auto& chk : checks) {
    if (chk.passed) continue;
    ++failed;
    fb.suggestions.push_back(chk.suggestion);
  }
  fb.confidence = confidence_from_failures(failed);
  if (failed == 0) {
    fb.analysis = "All " + std::to_string(checks.size()) + " rule checks pass.";
  } else {
    fb.analysis = std::to_string(failed) + " of " + std::to_string(checks.size()) + " rule checks fail:";
    for (const auto& chk : checks) {
      if (!chk.passed) fb.analysis += " " + chk.name + ";";
    }
  }
  return fb;
}

// ---------------------------------------------------------------------------
// Expectations from free text

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline bool contains_any(const std::string& text, std::initializer_list<const char*> words) {
  for (const char* w : words) {
    if (text.find(w) != std::string::npos) return true;
  }
  return false;
}

/// Position of the last occurrence of any word, or npos.
inline std::size_t last_of_words(const std::string& text, std::initializer_list<const char*> words) {
  std::size_t best = std::string::npos;
  for (const char* w : words) {
    const std::size_t p = text.rfind(w);
    if (p != std::string::npos && (best == std::string::npos || p > best)) best = p;
  }
  return best;
}

}  // namespace detail

/// Builds rule expectations from a prompt by keyword matching, for running
/// the rule-based verifier on prompts that did not come from the benchmark
/// generator. The subject is the first planned object whose name occurs in
/// the prompt. Without any keyword the expectation is that every object of
/// the first frame persists in all frames.
inline BenchCase infer_case(const std::string& prompt, const DynamicSceneSyntax& dss) {
  const std::string text = " " + detail::lower(prompt) + " ";
  BenchCase c;
  c.prompt_text = prompt;

  const auto names = dss.object_names();
  std::string subject = names.empty() ? std::string() : names.front();
  for (const auto& n : names) {
    const std::string ln = detail::lower(n);
    const auto sp = ln.rfind(' ');
    const std::string head = sp == std::string::npos ? ln : ln.substr(sp + 1);
    if (text.find(ln) != std::string::npos || text.find(" " + head) != std::string::npos) {
      subject = n;
      break;
    }
  }

  if (!subject.empty()) {
    if (detail::contains_any(text, {"quarter visible", "quarter-visible", "quarter of it", "a quarter"})) {
      c.expectation = VisibilityTarget{subject, 0.25};
      return c;
    }
    if (detail::contains_any(text, {"half visible", "half-visible", "halfway out", "half of it"})) {
      c.expectation = VisibilityTarget{subject, 0.5};
      return c;
    }
    if (detail::contains_any(text, {"grow", "bigger", "larger", "approach", "closer", "expand"})) {
      c.expectation = SizeTarget{subject, SizeTrend::kGrow};
      return c;
    }
    if (detail::contains_any(text, {"shrink", "smaller", "away", "recede", "into the distance"})) {
      c.expectation = SizeTarget{subject, SizeTrend::kShrink};
      return c;
    }
    const std::size_t left = detail::last_of_words(text, {" left", "leftward"});
    const std::size_t right = detail::last_of_words(text, {" right", "rightward"});
    const std::size_t up = detail::last_of_words(text, {" up ", " upward", " rise", " rising", " rises", " ascend"});
    const std::size_t down = detail::last_of_words(text, {" down", " fall", " falling", " falls", " sink", " descend"});
    std::size_t best = std::string::npos;
    MotionLabel label = MotionLabel::kNone;
    auto consider = [&](std::size_t pos, MotionLabel l) {
      if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
        best = pos;
        label = l;
      }
    };
    consider(left, MotionLabel::kLeft);
    consider(right, MotionLabel::kRight);
    consider(up, MotionLabel::kUp);
    consider(down, MotionLabel::kDown);
    if (label != MotionLabel::kNone) {
      c.expectation = MovementTarget{subject, label};
      return c;
    }
  }

  ObjectsTarget all;
  if (!dss.frames.empty()) {
    for (const auto& e : dss.frames.front().layout) all.names.push_back(e.object);
  }
  if (all.names.empty()) all.names = names;
  c.expectation = std::move(all);
  return c;
}

}  // namespace flowzero
