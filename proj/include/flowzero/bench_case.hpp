// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowzero/dss.hpp"

namespace flowzero {

enum class Task { kObjects, kMovement, kSize, kVisibility };
enum class MotionLabel { kLeft, kRight, kUp, kDown, kNone };
enum class SizeTrend { kGrow, kShrink, kConstant };

inline constexpr std::array<Task, 4> kAllTasks = {Task::kObjects, Task::kMovement, Task::kSize,
                                                  Task::kVisibility};

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::kObjects: return "objects";
    case Task::kMovement: return "movement";
    case Task::kSize: return "size";
    case Task::kVisibility: return "visibility";
  }
  return "objects";
}

inline std::string_view to_string(MotionLabel m) {
  switch (m) {
    case MotionLabel::kLeft: return "left";
    case MotionLabel::kRight: return "right";
    case MotionLabel::kUp: return "up";
    case MotionLabel::kDown: return "down";
    case MotionLabel::kNone: return "none";
  }
  return "none";
}

inline std::string_view to_string(SizeTrend s) {
  switch (s) {
    case SizeTrend::kGrow: return "grow";
    case SizeTrend::kShrink: return "shrink";
    case SizeTrend::kConstant: return "constant";
  }
  return "constant";
}

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view text, const std::array<Enum, N>& values) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

inline std::optional<Task> parse_task(std::string_view s) { return parse_enum(s, kAllTasks); }
inline std::optional<MotionLabel> parse_motion(std::string_view s) {
  return parse_enum(s, std::array{MotionLabel::kLeft, MotionLabel::kRight, MotionLabel::kUp,
                                  MotionLabel::kDown, MotionLabel::kNone});
}
inline std::optional<SizeTrend> parse_size_trend(std::string_view s) {
  return parse_enum(s, std::array{SizeTrend::kGrow, SizeTrend::kShrink, SizeTrend::kConstant});
}

struct ObjectsTarget {
  std::vector<std::string> names;
  friend bool operator==(const ObjectsTarget&, const ObjectsTarget&) = default;
};
struct MovementTarget {
  std::string object;
  MotionLabel label = MotionLabel::kNone;
  friend bool operator==(const MovementTarget&, const MovementTarget&) = default;
};
struct SizeTarget {
  std::string object;
  SizeTrend trend = SizeTrend::kConstant;
  friend bool operator==(const SizeTarget&, const SizeTarget&) = default;
};
struct VisibilityTarget {
  std::string object;
  double fraction = 0.5;  // 0.5 (half) or 0.25 (quarter)
  friend bool operator==(const VisibilityTarget&, const VisibilityTarget&) = default;
};

/// The variant alternative determines the task, so expectation and task
/// can never disagree.
using Expectation = std::variant<ObjectsTarget, MovementTarget, SizeTarget, VisibilityTarget>;

struct BenchCase {
  std::string prompt_text;
  Expectation expectation;
  std::uint64_t seed = 0;

  Task task() const { return static_cast<Task>(expectation.index()); }

  friend bool operator==(const BenchCase&, const BenchCase&) = default;
};

inline ordered_json to_json(const BenchCase& c) {
  ordered_json j;
  j["task"] = std::string(to_string(c.task()));
  j["prompt"] = c.prompt_text;
  j["seed"] = c.seed;
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ObjectsTarget>) {
          j["objects"] = e.names;
        } else if constexpr (std::is_same_v<T, MovementTarget>) {
          j["object"] = e.object;
          j["motion"] = std::string(to_string(e.label));
        } else if constexpr (std::is_same_v<T, SizeTarget>) {
          j["object"] = e.object;
          j["trend"] = std::string(to_string(e.trend));
        } else {
          j["object"] = e.object;
          j["visible_fraction"] = e.fraction;
        }
      },
      c.expectation);
  return j;
}

inline BenchCase bench_case_from_json(const ordered_json& j) {
  const std::string where = "bench case";
  auto task = parse_task(detail::require_string(j, "task", where));
  if (!task) throw SchemaError(where + ": unknown task");
  BenchCase c;
  c.prompt_text = detail::require_string(j, "prompt", where);
  c.seed = j.value("seed", std::uint64_t{0});
  switch (*task) {
    case Task::kObjects: {
      const auto& names = detail::require(j, "objects", where);
      if (!names.is_array() || names.empty()) {
        throw SchemaError(where + ": objects must be a non-empty array");
      }
      ObjectsTarget t;
      for (const auto& n : names) {
        if (!n.is_string()) throw SchemaError(where + ": object names must be strings");
        t.names.push_back(n.get<std::string>());
      }
      c.expectation = std::move(t);
      break;
    }
    case Task::kMovement: {
      auto label = parse_motion(detail::require_string(j, "motion", where));
      if (!label) throw SchemaError(where + ": unknown motion label");
      c.expectation = MovementTarget{detail::require_string(j, "object", where), *label};
      break;
    }
    case Task::kSize: {
      auto trend = parse_size_trend(detail::require_string(j, "trend", where));
      if (!trend) throw SchemaError(where + ": unknown size trend");
      c.expectation = SizeTarget{detail::require_string(j, "object", where), *trend};
      break;
    }
    case Task::kVisibility:
      c.expectation = VisibilityTarget{detail::require_string(j, "object", where),
                                       detail::require_number(j, "visible_fraction", where)};
      break;
  }
  return c;
}

}  // namespace flowzero
