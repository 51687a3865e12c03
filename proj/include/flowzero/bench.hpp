// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "flowzero/bench_case.hpp"
#include "flowzero/dss.hpp"
#include "flowzero/llm.hpp"
#include "flowzero/refine.hpp"
#include "flowzero/verify.hpp"

namespace flowzero {

// ---------------------------------------------------------------------------
// Case generation

namespace detail {

inline constexpr std::array kBenchNouns = {"cat",   "dog",  "horse", "car",     "bird", "boat",
                                           "ball",  "kite", "plane", "rabbit",  "bus",  "fox",
                                           "duck",  "train", "bicycle", "balloon"};
inline constexpr std::array kBenchColors = {"red", "blue", "white", "black", "yellow", "green", "brown", "orange"};
inline constexpr std::array kBenchScenes = {"on a beach", "in a park",     "on a city street",
                                            "in a meadow", "in the desert", "by a lake"};

template <typename Array>
const char* pick(std::mt19937_64& rng, const Array& a) {
  return a[rng() % a.size()];
}

inline std::uint64_t task_salt(Task t) { return 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(t) + 1); }

}  // namespace detail

/// `n` prompts for one task, deterministic in `seed`. Movement targets
/// rotate through left/right/up/down, size targets alternate grow/shrink,
/// visibility targets alternate 0.5/0.25 over the four canvas edges, and
/// object cases ask for 2 to 4 distinct objects.
inline std::vector<BenchCase> gen_cases(Task task, int n, std::uint64_t seed) {
  if (n < 1) throw RangeError("number of benchmark cases must be >= 1");
  std::mt19937_64 rng(seed ^ detail::task_salt(task));
  std::vector<BenchCase> cases;
  cases.reserve(static_cast<std::size_t>(n));
  const std::size_t rotate = rng() % 4;
  for (int i = 0; i < n; ++i) {
    BenchCase c;
    c.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const std::string scene = detail::pick(rng, detail::kBenchScenes);
    const std::string object = std::string(detail::pick(rng, detail::kBenchColors)) + " " +
                               detail::pick(rng, detail::kBenchNouns);
    const std::size_t slot = (static_cast<std::size_t>(i) + rotate) % 4;
    switch (task) {
      case Task::kObjects: {
        const std::size_t count = 2 + rng() % 3;
        std::vector<std::string> nouns(detail::kBenchNouns.begin(), detail::kBenchNouns.end());
        for (std::size_t j = nouns.size(); j > 1; --j) std::swap(nouns[j - 1], nouns[rng() % j]);
        ObjectsTarget t;
        std::string text = "";
        for (std::size_t j = 0; j < count; ++j) {
          t.names.push_back(std::string(detail::pick(rng, detail::kBenchColors)) + " " + nouns[j]);
          text += (j == 0 ? "a " : j + 1 == count ? " and a " : ", a ") + t.names.back();
        }
        c.prompt_text = text + " " + scene;
        c.expectation = std::move(t);
        break;
      }
      case Task::kMovement: {
        static constexpr std::array<MotionLabel, 4> labels = {MotionLabel::kLeft, MotionLabel::kRight,
                                                              MotionLabel::kUp, MotionLabel::kDown};
        static constexpr std::array<const char*, 4> phrases = {"moving from right to left",
                                                               "moving from left to right",
                                                               "rising upward", "falling downward"};
        c.prompt_text = "a " + object + " " + phrases[slot] + " " + scene;
        c.expectation = MovementTarget{object, labels[slot]};
        break;
      }
      case Task::kSize: {
        const bool grow = (i % 2) == 0;
        c.prompt_text = grow ? "a " + object + " approaching the camera " + scene + ", growing larger"
                             : "a " + object + " moving away from the camera " + scene + ", becoming smaller";
        c.expectation = SizeTarget{object, grow ? SizeTrend::kGrow : SizeTrend::kShrink};
        break;
      }
      case Task::kVisibility: {
        static constexpr std::array<const char*, 4> edges = {"left", "right", "top", "bottom"};
        const bool half = (i % 2) == 0;
        c.prompt_text = "a " + object + " " + scene + " sliding out of view until it is " +
                        (half ? "half visible" : "quarter visible") + " at the " + edges[slot] +
                        " edge of the frame";
        c.expectation = VisibilityTarget{object, half ? 0.5 : 0.25};
        break;
      }
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

// ---------------------------------------------------------------------------
// Reference layouts and error injection

namespace detail {

inline BoundingBox centered_box(double cx, double cy, double w, double h) {
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

inline std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

/// Edge named in a visibility prompt; defaults to the right edge.
inline std::string prompt_edge(const std::string& prompt) {
  for (const char* e : {"left", "right", "top", "bottom"}) {
    if (prompt.find(std::string("the ") + e + " edge") != std::string::npos) return e;
  }
  return "right";
}

}  // namespace detail

/// A layout that satisfies every rule of the case.
inline DynamicSceneSyntax reference_layout(const BenchCase& c, int num_frames) {
  DynamicSceneSyntax dss;
  dss.prompt = {c.prompt_text, num_frames};
  const int n = num_frames;
  auto t_of = [n](int i) { return n > 1 ? static_cast<double>(i) / (n - 1) : 0.0; };
  for (int i = 0; i < n; ++i) {
    FramePlan f;
    f.index = i;
    f.description = detail::capitalized(c.prompt_text) + ", frame " + std::to_string(i + 1) + " of " +
                    std::to_string(n) + ".";
    f.background = {Direction::kRandom, 0.1};
    const double t = t_of(i);
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, ObjectsTarget>) {
            const double k = static_cast<double>(e.names.size());
            const double w = std::min(0.2, 0.8 / k);
            for (std::size_t j = 0; j < e.names.size(); ++j) {
              f.layout.push_back({e.names[j], detail::centered_box((j + 0.5) / k, 0.6, w, 0.2)});
            }
          } else if constexpr (std::is_same_v<T, MovementTarget>) {
            double cx = 0.5, cy = 0.55;
            switch (e.label) {
              case MotionLabel::kLeft: cx = 0.75 - 0.5 * t; f.background = {Direction::kRight, 0.3}; break;
              case MotionLabel::kRight: cx = 0.25 + 0.5 * t; f.background = {Direction::kLeft, 0.3}; break;
              case MotionLabel::kUp: cy = 0.75 - 0.5 * t; f.background = {Direction::kDown, 0.3}; break;
              case MotionLabel::kDown: cy = 0.25 + 0.5 * t; f.background = {Direction::kUp, 0.3}; break;
              case MotionLabel::kNone: break;
            }
            f.layout.push_back({e.object, detail::centered_box(cx, cy, 0.2, 0.2)});
          } else if constexpr (std::is_same_v<T, SizeTarget>) {
            const double a = e.trend == SizeTrend::kShrink ? 0.45 : 0.15;
            const double b = e.trend == SizeTrend::kGrow ? 0.45 : e.trend == SizeTrend::kShrink ? 0.15 : a;
            const double side = a + (b - a) * t;
            f.layout.push_back({e.object, detail::centered_box(0.5, 0.55, side, side)});
          } else {
            const double side = 0.3;
            const double hidden = (1.0 - e.fraction) * side;
            const std::string edge = detail::prompt_edge(c.prompt_text);
            double fx = 0.5, fy = 0.5;  // final centre
            if (edge == "left") fx = -hidden + 0.5 * side;
            if (edge == "right") fx = 1.0 + hidden - 0.5 * side;
            if (edge == "top") fy = -hidden + 0.5 * side;
            if (edge == "bottom") fy = 1.0 + hidden - 0.5 * side;
            f.layout.push_back({e.object, detail::centered_box(0.5 + (fx - 0.5) * t, 0.5 + (fy - 0.5) * t, side, side)});
          }
        },
        c.expectation);
    dss.frames.push_back(std::move(f));
  }
  validate(dss);
  return dss;
}

/// Number of independent rule violations `inject_error` can introduce.
inline int max_injectable_errors(const BenchCase& c, int num_frames) {
  return std::visit(
      [num_frames](const auto& e) -> int {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ObjectsTarget>) {
          return static_cast<int>(e.names.size());
        } else if constexpr (std::is_same_v<T, VisibilityTarget>) {
          return 1;
        } else {
          return num_frames >= 3 ? 2 : 1;
        }
      },
      c.expectation);
}

/// Applies violation number `which` (0-based) to a layout. Each violation
/// breaks exactly one rule check of the case.
inline void inject_error(DynamicSceneSyntax& dss, const BenchCase& c, int which) {
  auto drop = [&](const std::string& name, int frame) {
    auto& layout = dss.frames[static_cast<std::size_t>(frame)].layout;
    layout.erase(std::remove_if(layout.begin(), layout.end(), [&](const auto& e) { return e.object == name; }),
                 layout.end());
  };
  const int n = dss.num_frames();
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ObjectsTarget>) {
          for (int i = 0; i < n; ++i) drop(e.names[static_cast<std::size_t>(which)], i);
        } else if constexpr (std::is_same_v<T, MovementTarget>) {
          if (which == 1) {
            drop(e.object, n / 2);
            return;
          }
          // Reverse the trajectory: the object travels the opposite way.
          std::vector<BoundingBox> boxes;
          for (const auto& f : dss.frames) {
            if (auto* le = f.find(e.object)) boxes.push_back(le->box);
          }
          std::reverse(boxes.begin(), boxes.end());
          std::size_t j = 0;
          for (auto& f : dss.frames) {
            for (auto& le : f.layout) {
              if (le.object == e.object) le.box = boxes[j++];
            }
          }
        } else if constexpr (std::is_same_v<T, SizeTarget>) {
          if (which == 1) {
            drop(e.object, n / 2);
            return;
          }
          std::optional<BoundingBox> first;
          for (auto& f : dss.frames) {
            for (auto& le : f.layout) {
              if (le.object != e.object) continue;
              if (!first) first = le.box;
              le.box = *first;
            }
          }
        } else {
          // Final frame fully inside the canvas.
          for (auto& le : dss.frames.back().layout) {
            if (le.object == e.object) {
              const double w = le.box.width();
              const double h = le.box.height();
              le.box = detail::centered_box(0.5, 0.5, w, h);
            }
          }
        }
      },
      c.expectation);
}

/// Layouts a rectifier that fixes one violation per call would produce:
/// element j carries violations j..k-1, the last element none.
inline std::vector<DynamicSceneSyntax> error_chain(const BenchCase& c, int num_frames, int errors) {
  const int k = std::clamp(errors, 0, max_injectable_errors(c, num_frames));
  const DynamicSceneSyntax clean = reference_layout(c, num_frames);
  std::vector<DynamicSceneSyntax> chain;
  for (int j = 0; j <= k; ++j) {
    DynamicSceneSyntax d = clean;
    for (int v = j; v < k; ++v) inject_error(d, c, v);
    chain.push_back(std::move(d));
  }
  return chain;
}

/// Deterministic stand-in for the planner LLM. Generation and rectification
/// requests are answered with the next layout of a fixed chain; verification
/// requests are answered by the rule-based verifier on the last layout
/// served.
class SimulatedPlanner : public LlmClient {
 public:
  SimulatedPlanner(BenchCase c, std::vector<DynamicSceneSyntax> chain, VerifyThresholds th = {})
      : case_(std::move(c)), chain_(std::move(chain)), th_(th) {}

  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    ++calls_;
    if (request.purpose == Purpose::kVerify) {
      if (served_ == 0) throw ScriptExhausted("verification requested before any layout was served");
      return to_json(local_feedback(chain_[served_ - 1], case_, th_)).dump(2);
    }
    if (served_ >= chain_.size()) {
      throw ScriptExhausted("simulated planner has no further layouts (" + std::to_string(chain_.size()) + ")");
    }
    return serialize_dss(chain_[served_++]);
  }

  std::size_t layouts_served() const {
    std::lock_guard lock(mu_);
    return served_;
  }
  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  mutable std::mutex mu_;
  BenchCase case_;
  std::vector<DynamicSceneSyntax> chain_;
  VerifyThresholds th_;
  std::size_t served_ = 0;
  std::size_t calls_ = 0;
};

/// Indices of the cases that receive an injected error: exactly
/// round(rate * n) of them, chosen by a seeded shuffle.
inline std::vector<bool> error_schedule(std::size_t n, double rate, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t j = n; j > 1; --j) std::swap(idx[j - 1], idx[rng() % j]);
  const auto count = static_cast<std::size_t>(std::llround(std::clamp(rate, 0.0, 1.0) * static_cast<double>(n)));
  std::vector<bool> flagged(n, false);
  for (std::size_t j = 0; j < count; ++j) flagged[idx[j]] = true;
  return flagged;
}

// ---------------------------------------------------------------------------
// Benchmark run

struct CaseOutcome {
  BenchCase bench_case;
  RuleReport without_refine;
  RuleReport with_refine;
  int iterations = 0;
  std::string terminal_reason;
  std::string error;  // non-empty when the case could not be run
};

struct TaskAccuracy {
  Task task = Task::kObjects;
  int cases = 0;
  int passed_without = 0;
  int passed_with = 0;

  double accuracy_without() const { return cases ? static_cast<double>(passed_without) / cases : 0.0; }
  double accuracy_with() const { return cases ? static_cast<double>(passed_with) / cases : 0.0; }
};

struct BenchResult {
  std::vector<TaskAccuracy> tasks;
  std::vector<CaseOutcome> outcomes;

  const TaskAccuracy& accuracy(Task t) const {
    for (const auto& a : tasks) {
      if (a.task == t) return a;
    }
    throw NotFound("task not in result");
  }
};

struct BenchOptions {
  int cases_per_task = 20;
  std::uint64_t seed = 0;
  int num_frames = 8;
  int concurrency = 4;
  std::vector<Task> tasks = {kAllTasks.begin(), kAllTasks.end()};
  PromptTemplates templates = default_templates();
};

/// Supplies the client used for one case. `index` is the position of the
/// case in the run (tasks in order, cases in order).
using ClientFactory = std::function<std::shared_ptr<LlmClient>(const BenchCase&, std::size_t index)>;

/// Scores the first generated layout (without refinement) and the selected
/// layout after refinement for every case. Cases run on up to
/// `opts.concurrency` threads; a failing case is recorded, never fatal.
inline BenchResult run_benchmark(const ClientFactory& make_client, const RefineConfig& cfg,
                                 const BenchOptions& opts) {
  validate(cfg);
  std::vector<BenchCase> cases;
  for (Task t : opts.tasks) {
    auto more = gen_cases(t, opts.cases_per_task, opts.seed);
    cases.insert(cases.end(), more.begin(), more.end());
  }

  BenchResult result;
  result.outcomes.resize(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      CaseOutcome& out = result.outcomes[i];
      out.bench_case = cases[i];
      out.without_refine.task = out.with_refine.task = cases[i].task();
      try {
        auto client = make_client(cases[i], i);
        const ScenePrompt prompt{cases[i].prompt_text, opts.num_frames};
        const RefinementTrace trace = run_refinement(prompt, *client, cfg, opts.templates, cases[i]);
        out.without_refine = score_case(cases[i], trace.initial(), cfg.thresholds);
        out.with_refine = score_case(cases[i], trace.selected(), cfg.thresholds);
        out.iterations = static_cast<int>(trace.iterations.size());
        out.terminal_reason = std::string(to_string(trace.terminal_reason));
      } catch (const std::exception& e) {
        out.error = e.what();
        out.without_refine.detail = out.with_refine.detail = std::string("error: ") + e.what();
      }
    }
  };
  const int threads = std::clamp(opts.concurrency, 1, 64);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (Task t : opts.tasks) {
    TaskAccuracy acc{t, 0, 0, 0};
    for (const auto& o : result.outcomes) {
      if (o.bench_case.task() != t) continue;
      ++acc.cases;
      acc.passed_without += o.without_refine.passed ? 1 : 0;
      acc.passed_with += o.with_refine.passed ? 1 : 0;
    }
    result.tasks.push_back(acc);
  }
  return result;
}

/// Client factory for the simulated planner with a fixed error-injection
/// rate: exactly round(rate * n) cases per task start with one violation.
inline ClientFactory simulated_factory(const BenchOptions& opts, double error_rate, const VerifyThresholds& th = {}) {
  std::vector<bool> flagged;
  for (Task t : opts.tasks) {
    auto s = error_schedule(static_cast<std::size_t>(opts.cases_per_task), error_rate, opts.seed ^ detail::task_salt(t));
    flagged.insert(flagged.end(), s.begin(), s.end());
  }
  const int frames = opts.num_frames;
  return [flagged, frames, th](const BenchCase& c, std::size_t index) -> std::shared_ptr<LlmClient> {
    const int errors = index < flagged.size() && flagged[index] ? 1 : 0;
    return std::make_shared<SimulatedPlanner>(c, error_chain(c, frames, errors), th);
  };
}

inline std::string percent(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.0f%%", 100.0 * v);
  return buf;
}

/// Plain-text accuracy table: one row per method, one column per task.
inline std::string render_table(const BenchResult& r) {
  std::string header = "Method          ";
  std::string row_wo = "w/o self-refine ";
  std::string row_w = "w/ self-refine  ";
  for (const auto& a : r.tasks) {
    char col[32];
    std::string name(to_string(a.task));
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    std::snprintf(col, sizeof(col), " | %-10s", name.c_str());
    header += col;
    std::snprintf(col, sizeof(col), " | %-10s", percent(a.accuracy_without()).c_str());
    row_wo += col;
    std::snprintf(col, sizeof(col), " | %-10s", percent(a.accuracy_with()).c_str());
    row_w += col;
  }
  std::string rule(header.size(), '-');
  return header + "\n" + rule + "\n" + row_wo + "\n" + row_w + "\n";
}

inline ordered_json to_json(const BenchResult& r) {
  ordered_json tasks = ordered_json::array();
  for (const auto& a : r.tasks) {
    tasks.push_back({{"task", std::string(to_string(a.task))},
                     {"cases", a.cases},
                     {"passed_without_refine", a.passed_without},
                     {"passed_with_refine", a.passed_with},
                     {"accuracy_without_refine", a.accuracy_without()},
                     {"accuracy_with_refine", a.accuracy_with()}});
  }
  ordered_json cases = ordered_json::array();
  for (const auto& o : r.outcomes) {
    ordered_json jc{{"case", to_json(o.bench_case)},
                    {"without_refine", to_json(o.without_refine)},
                    {"with_refine", to_json(o.with_refine)},
                    {"iterations", o.iterations},
                    {"terminal_reason", o.terminal_reason}};
    if (!o.error.empty()) jc["error"] = o.error;
    cases.push_back(std::move(jc));
  }
  return ordered_json{{"tasks", std::move(tasks)}, {"cases", std::move(cases)}};
}

/// One JSON object per line: the rule reports of every case.
inline std::string rule_reports_jsonl(const BenchResult& r) {
  std::string out;
  for (const auto& o : r.outcomes) {
    out += ordered_json{{"prompt", o.bench_case.prompt_text},
                        {"stage", "without_refine"},
                        {"report", to_json(o.without_refine)}}
               .dump() +
           "\n";
    out += ordered_json{{"prompt", o.bench_case.prompt_text},
                        {"stage", "with_refine"},
                        {"report", to_json(o.with_refine)}}
               .dump() +
           "\n";
  }
  return out;
}

}  // namespace flowzero
