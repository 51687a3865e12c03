// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "flowzero/dss.hpp"
#include "flowzero/io.hpp"
#include "flowzero/llm.hpp"
#include "flowzero/verify.hpp"

namespace flowzero {

enum class FeedbackMode { kLlm, kLocal };
enum class TerminalReason { kConverged, kExhausted };

inline std::string_view to_string(FeedbackMode m) { return m == FeedbackMode::kLlm ? "llm" : "local"; }
inline std::string_view to_string(TerminalReason r) {
  return r == TerminalReason::kConverged ? "converged" : "exhausted";
}

struct RefineConfig {
  int threshold = 3;  // lambda
  int max_iterations = 5;
  FeedbackMode feedback_mode = FeedbackMode::kLlm;
  bool inclusive = false;  // converge on c >= lambda instead of c > lambda
  double generate_temperature = 0.7;
  std::string model_id = "gpt-4";
  int max_tokens = 4096;
  VerifyThresholds thresholds;
};

inline void validate(const RefineConfig& cfg) {
  if (cfg.threshold < 1 || cfg.threshold > 5) throw ConfigError("lambda must be in [1, 5]");
  if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(cfg.generate_temperature >= 0.0 && cfg.generate_temperature <= 2.0)) {
    throw ConfigError("temperature must be in [0, 2]");
  }
}

inline bool converged(const RefineConfig& cfg, int confidence) {
  return cfg.inclusive ? confidence >= cfg.threshold : confidence > cfg.threshold;
}

struct RefinementIteration {
  DynamicSceneSyntax dss;
  FeedbackReport feedback;
};

struct RefinementTrace {
  std::vector<RefinementIteration> iterations;
  TerminalReason terminal_reason = TerminalReason::kExhausted;

  const DynamicSceneSyntax& initial() const { return iterations.front().dss; }
  const DynamicSceneSyntax& last() const { return iterations.back().dss; }

  /// Highest-confidence iteration; ties resolve to the later one.
  std::size_t best_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < iterations.size(); ++i) {
      if (iterations[i].feedback.confidence >= iterations[best].feedback.confidence) best = i;
    }
    return best;
  }
  const DynamicSceneSyntax& selected() const { return iterations[best_index()].dss; }
};

// ---------------------------------------------------------------------------
// Reply parsing

/// The JSON payload of a reply: the body of the first ``` fence if any,
/// otherwise the span from the first '{' to the last '}'.
inline std::string extract_json_block(const std::string& reply) {
  if (auto fence = reply.find("```"); fence != std::string::npos) {
    auto start = reply.find('\n', fence);
    auto end = start == std::string::npos ? std::string::npos : reply.find("```", start);
    if (end != std::string::npos) return reply.substr(start + 1, end - start - 1);
  }
  auto open = reply.find('{');
  auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return reply;
  return reply.substr(open, close - open + 1);
}

inline FeedbackReport parse_feedback(const std::string& reply) {
  try {
    auto doc = ordered_json::parse(extract_json_block(reply));
    if (doc.is_object() && doc.contains("confidence")) {
      const auto& c = doc["confidence"];
      std::optional<double> value;
      if (c.is_number()) {
        value = c.get<double>();
      } else if (c.is_string()) {
        try {
          value = std::stod(c.get<std::string>());
        } catch (const std::exception&) {
        }
      }
      if (value && std::isfinite(*value)) {
        FeedbackReport fb;
        fb.confidence = std::clamp(static_cast<int>(std::lround(*value)), 1, 5);
        if (doc.contains("analysis")) {
          fb.analysis = doc["analysis"].is_string() ? doc["analysis"].get<std::string>() : doc["analysis"].dump();
        }
        if (doc.contains("suggestions") && doc["suggestions"].is_array()) {
          for (const auto& s : doc["suggestions"]) {
            fb.suggestions.push_back(s.is_string() ? s.get<std::string>() : s.dump());
          }
        }
        return fb;
      }
    }
  } catch (const nlohmann::json::exception&) {
  }
  static const std::regex confidence_re(R"(confidence\D*?\b(\d+)\b)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(reply, m, confidence_re)) {
    FeedbackReport fb;
    const long v = std::stol(m[1].str().substr(0, 9));
    fb.confidence = static_cast<int>(std::clamp<long>(v, 1, 5));
    fb.analysis = reply;
    return fb;
  }
  throw FeedbackUnparseable("no confidence score found in verifier reply");
}

// ---------------------------------------------------------------------------
// Loop steps

namespace detail {

inline ChatRequest make_request(const RefineConfig& cfg, Purpose purpose, std::string content,
                                double temperature) {
  ChatRequest r;
  r.system_prompt = std::string(kSystemPrompt);
  r.messages.push_back({Role::kUser, std::move(content)});
  r.temperature = temperature;
  r.max_tokens = cfg.max_tokens;
  r.model_id = cfg.model_id;
  r.purpose = purpose;
  return r;
}

inline DynamicSceneSyntax parse_reply_dss(const std::string& reply, const ScenePrompt& prompt) {
  DynamicSceneSyntax dss = parse_dss(extract_json_block(reply));
  if (dss.prompt.num_frames != prompt.num_frames) {
    throw SchemaError("expected " + std::to_string(prompt.num_frames) + " frames, got " +
                      std::to_string(dss.prompt.num_frames));
  }
  dss.prompt = prompt;
  return dss;
}

/// One request, plus a single repair round-trip quoting the parse error.
inline DynamicSceneSyntax request_dss(LlmClient& client, ChatRequest request,
                                      const ScenePrompt& prompt) {
  const std::string first = client.complete(request);
  try {
    return parse_reply_dss(first, prompt);
  } catch (const Error& e) {
    request.messages.push_back({Role::kAssistant, first});
    request.messages.push_back(
        {Role::kUser, "Your reply could not be used: " + std::string(e.what()) +
                          ". Reply again with only the corrected JSON document."});
    request.purpose = Purpose::kRepair;
    const std::string second = client.complete(request);
    try {
      return parse_reply_dss(second, prompt);
    } catch (const Error& e2) {
      throw LLMFormatError(std::string("two consecutive unparseable replies; last error: ") + e2.what());
    }
  }
}

}  // namespace detail

inline DynamicSceneSyntax generate_syntax(const ScenePrompt& prompt, LlmClient& client,
                                          const PromptTemplates& templates, const RefineConfig& cfg = {}) {
  validate_prompt(prompt);
  const std::string text = render_prompt(
      templates.generate, {{"prompt", prompt.text}, {"num_frames", std::to_string(prompt.num_frames)}});
  return detail::request_dss(
      client, detail::make_request(cfg, Purpose::kGenerate, text, cfg.generate_temperature), prompt);
}

inline FeedbackReport verify_with_llm(const DynamicSceneSyntax& dss, LlmClient& client,
                                      const PromptTemplates& templates, const RefineConfig& cfg) {
  const std::string text =
      render_prompt(templates.verify, {{"prompt", dss.prompt.text}, {"dss_json", serialize_dss(dss)}});
  return parse_feedback(client.complete(detail::make_request(cfg, Purpose::kVerify, text, 0.0)));
}

/// Descriptions are carried over from `current`; only layouts and
/// background motion are taken from the reply.
inline DynamicSceneSyntax rectify(const DynamicSceneSyntax& current, const FeedbackReport& feedback,
                                  LlmClient& client, const PromptTemplates& templates,
                                  const RefineConfig& cfg) {
  const std::string text = render_prompt(templates.rectify, {{"prompt", current.prompt.text},
                                                             {"dss_json", serialize_dss(current)},
                                                             {"feedback_json", to_json(feedback).dump(2)}});
  DynamicSceneSyntax next = detail::request_dss(
      client, detail::make_request(cfg, Purpose::kRectify, text, 0.0), current.prompt);
  for (std::size_t i = 0; i < next.frames.size(); ++i) {
    next.frames[i].description = current.frames[i].description;
  }
  if (!next.canvas) next.canvas = current.canvas;
  return next;
}

/// Generate, then verify and rectify until the confidence passes the
/// threshold or `max_iterations` verifications have been made. Local
/// feedback uses `expectation`, or expectations inferred from the prompt.
inline RefinementTrace run_refinement(const ScenePrompt& prompt, LlmClient& client, const RefineConfig& cfg,
                                      const PromptTemplates& templates = default_templates(),
                                      std::optional<BenchCase> expectation = std::nullopt) {
  validate(cfg);
  RefinementTrace trace;
  DynamicSceneSyntax dss = generate_syntax(prompt, client, templates, cfg);
  if (cfg.feedback_mode == FeedbackMode::kLocal && !expectation) {
    expectation = infer_case(prompt.text, dss);
  }
  for (int k = 1;; ++k) {
    FeedbackReport fb = cfg.feedback_mode == FeedbackMode::kLocal
                            ? local_feedback(dss, *expectation, cfg.thresholds)
                            : verify_with_llm(dss, client, templates, cfg);
    trace.iterations.push_back({dss, fb});
    if (converged(cfg, fb.confidence)) {
      trace.terminal_reason = TerminalReason::kConverged;
      break;
    }
    if (k >= cfg.max_iterations) {
      trace.terminal_reason = TerminalReason::kExhausted;
      break;
    }
    dss = rectify(dss, trace.iterations.back().feedback, client, templates, cfg);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Persistence: {out}/iter_{k}/dss.json, feedback.json and {out}/trace.json

inline ordered_json trace_summary_json(const RefinementTrace& trace, const RefineConfig& cfg) {
  ordered_json iters = ordered_json::array();
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const std::string dir = "iter_" + std::to_string(i + 1);
    iters.push_back({{"iteration", i + 1},
                     {"confidence", trace.iterations[i].feedback.confidence},
                     {"dss", dir + "/dss.json"},
                     {"feedback", dir + "/feedback.json"}});
  }
  return ordered_json{{"threshold", cfg.threshold},
                      {"comparison", cfg.inclusive ? ">=" : ">"},
                      {"max_iterations", cfg.max_iterations},
                      {"feedback_mode", std::string(to_string(cfg.feedback_mode))},
                      {"terminal_reason", std::string(to_string(trace.terminal_reason))},
                      {"selected_iteration", trace.best_index() + 1},
                      {"iterations", std::move(iters)}};
}

/// Whole trace as one document, used for replay comparisons.
inline std::string serialize_trace(const RefinementTrace& trace, const RefineConfig& cfg) {
  ordered_json doc = trace_summary_json(trace, cfg);
  ordered_json full = ordered_json::array();
  for (const auto& it : trace.iterations) {
    full.push_back({{"dss", to_json(it.dss)}, {"feedback", to_json(it.feedback)}});
  }
  doc["content"] = std::move(full);
  return doc.dump(2);
}

inline void write_trace(const RefinementTrace& trace, const RefineConfig& cfg,
                        const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto dir = out_dir / ("iter_" + std::to_string(i + 1));
    write_file_atomic(dir / "dss.json", serialize_dss(trace.iterations[i].dss) + "\n");
    write_file_atomic(dir / "feedback.json", to_json(trace.iterations[i].feedback).dump(2) + "\n");
  }
  write_file_atomic(out_dir / "trace.json", trace_summary_json(trace, cfg).dump(2) + "\n");
}

}  // namespace flowzero
