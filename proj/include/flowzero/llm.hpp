// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowzero/error.hpp"

namespace flowzero {

using ordered_json = nlohmann::ordered_json;

enum class Role { kUser, kAssistant };

/// Why a request is made. Used by test doubles to answer by role and kept
/// in transcripts; never sent over the wire.
enum class Purpose { kGenerate, kVerify, kRectify, kRepair, kOther };

inline std::string_view to_string(Role r) { return r == Role::kUser ? "user" : "assistant"; }

inline std::string_view to_string(Purpose p) {
  switch (p) {
    case Purpose::kGenerate: return "generate";
    case Purpose::kVerify: return "verify";
    case Purpose::kRectify: return "rectify";
    case Purpose::kRepair: return "repair";
    case Purpose::kOther: return "other";
  }
  return "other";
}

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id = "gpt-4";
  Purpose purpose = Purpose::kOther;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

inline void validate(const ChatRequest& r) {
  if (r.messages.empty()) throw RequestError("chat request has no messages");
  if (!(r.temperature >= 0.0 && r.temperature <= 2.0)) {
    throw RequestError("temperature must be in [0, 2]");
  }
  if (r.max_tokens <= 0) throw RequestError("max_tokens must be positive");
}

/// OpenAI-compatible chat-completions body.
inline ordered_json to_wire_json(const ChatRequest& r) {
  ordered_json msgs = ordered_json::array();
  if (!r.system_prompt.empty()) msgs.push_back({{"role", "system"}, {"content", r.system_prompt}});
  for (const auto& m : r.messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  return ordered_json{{"model", r.model_id},
                      {"messages", std::move(msgs)},
                      {"temperature", r.temperature},
                      {"max_tokens", r.max_tokens}};
}

/// A chat-completion backend. Implementations are safe to share between
/// threads; request state lives in the call.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct TranscriptEntry {
  ChatRequest request;
  std::string response;
};

inline ordered_json to_json(const TranscriptEntry& e) {
  return ordered_json{{"purpose", std::string(to_string(e.request.purpose))},
                      {"request", to_wire_json(e.request)},
                      {"response", e.response}};
}

inline ordered_json transcript_to_json(const std::vector<TranscriptEntry>& entries) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : entries) arr.push_back(to_json(e));
  return ordered_json{{"version", 1}, {"entries", std::move(arr)}};
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ordered_json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

}  // namespace detail

/// Serves canned responses in order and records every call. Running past
/// the end of the script is an error.
class ScriptedClient : public LlmClient {
 public:
  explicit ScriptedClient(std::vector<std::string> script) : script_(std::move(script)) {}

  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    if (cursor_ >= script_.size()) {
      throw ScriptExhausted("script exhausted after " + std::to_string(script_.size()) +
                            " response(s); unexpected " + std::string(to_string(request.purpose)) +
                            " request");
    }
    const std::string& reply = script_[cursor_++];
    transcript_.push_back({request, reply});
    return reply;
  }

  std::size_t cursor() const {
    std::lock_guard lock(mu_);
    return cursor_;
  }
  std::size_t size() const { return script_.size(); }
  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::size_t cursor_ = 0;
  std::vector<TranscriptEntry> transcript_;
};

/// Script file: a JSON array, or {"responses": [...]}. String entries are
/// used verbatim; any other JSON value is re-serialized, so scene documents
/// can be written inline.
inline std::vector<std::string> load_script(const std::filesystem::path& path) {
  ordered_json doc = detail::read_json_file(path);
  if (doc.is_object() && doc.contains("responses")) doc = doc["responses"];
  if (!doc.is_array()) throw ConfigError(path.string() + ": script must be a JSON array");
  std::vector<std::string> out;
  for (const auto& v : doc) out.push_back(v.is_string() ? v.get<std::string>() : v.dump(2));
  return out;
}

/// Forwards to another client and keeps the exchange for later replay.
class RecordingClient : public LlmClient {
 public:
  explicit RecordingClient(std::shared_ptr<LlmClient> inner) : inner_(std::move(inner)) {}

  std::string complete(const ChatRequest& request) override {
    std::string reply = inner_->complete(request);
    std::lock_guard lock(mu_);
    entries_.push_back({request, reply});
    return reply;
  }

  std::vector<TranscriptEntry> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write transcript " + path.string());
    out << transcript_to_json(entries()).dump(2) << '\n';
  }

 private:
  std::shared_ptr<LlmClient> inner_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

/// Replays a recorded transcript. Each request must match the recorded
/// wire body exactly, otherwise ReplayMismatch.
class ReplayClient : public LlmClient {
 public:
  explicit ReplayClient(const std::filesystem::path& path) {
    ordered_json doc = detail::read_json_file(path);
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
      throw ConfigError(path.string() + ": not a transcript file");
    }
    for (const auto& e : doc["entries"]) {
      if (!e.contains("request") || !e.contains("response") || !e["response"].is_string()) {
        throw ConfigError(path.string() + ": malformed transcript entry");
      }
      entries_.push_back({e["request"].dump(), e["response"].get<std::string>()});
    }
  }

  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    if (cursor_ >= entries_.size()) {
      throw ScriptExhausted("transcript exhausted after " + std::to_string(entries_.size()) + " entries");
    }
    const auto& [recorded, reply] = entries_[cursor_];
    if (to_wire_json(request).dump() != recorded) {
      throw ReplayMismatch("request " + std::to_string(cursor_ + 1) +
                           " differs from the recorded transcript");
    }
    ++cursor_;
    return reply;
  }

 private:
  std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Prompt templates

enum class TemplateName { kGenerate, kVerify, kRectify };

inline std::string_view to_string(TemplateName n) {
  switch (n) {
    case TemplateName::kGenerate: return "generate";
    case TemplateName::kVerify: return "verify";
    case TemplateName::kRectify: return "rectify";
  }
  return "generate";
}

struct PromptTemplate {
  TemplateName name = TemplateName::kGenerate;
  std::string template_text;
  std::string in_context_example;
};

/// Names of `{identifier}` placeholders in order of first occurrence. Brace
/// groups that are not a bare identifier (JSON, coordinate lists) are text.
inline std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !(std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) continue;
    while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
    if (j < text.size() && text[j] == '}') {
      std::string name(text.substr(i + 1, j - i - 1));
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
      i = j;
    }
  }
  return out;
}

/// Substitutes every placeholder, then appends the in-context example
/// verbatim. Extra bindings are ignored.
inline std::string render_prompt(const PromptTemplate& tmpl,
                                 const std::map<std::string, std::string>& bindings) {
  const std::string_view text = tmpl.template_text;
  std::string out;
  out.reserve(text.size() + 256);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      if (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
        if (j < text.size() && text[j] == '}') {
          const std::string name(text.substr(i + 1, j - i - 1));
          auto it = bindings.find(name);
          if (it == bindings.end()) {
            throw MissingBinding(std::string(to_string(tmpl.name)) + " template needs a binding for {" +
                                 name + "}");
          }
          out += it->second;
          i = j;
          continue;
        }
      }
    }
    out.push_back(text[i]);
  }
  if (!tmpl.in_context_example.empty()) {
    out += "\n\n";
    out += tmpl.in_context_example;
  }
  return out;
}

inline std::vector<std::string> required_placeholders(TemplateName n) {
  switch (n) {
    case TemplateName::kGenerate: return {"prompt", "num_frames"};
    case TemplateName::kVerify: return {"prompt", "dss_json"};
    case TemplateName::kRectify: return {"prompt", "dss_json", "feedback_json"};
  }
  return {};
}

inline void validate(const PromptTemplate& t) {
  const auto present = placeholders(t.template_text);
  for (const auto& need : required_placeholders(t.name)) {
    if (std::find(present.begin(), present.end(), need) == present.end()) {
      throw TemplateError(std::string(to_string(t.name)) + " template lacks placeholder {" + need + "}");
    }
  }
}

inline constexpr std::string_view kSystemPrompt =
    "You are a careful video planner. You turn short video prompts into frame-by-frame scene "
    "plans with object bounding boxes and background motion, and you check such plans for "
    "spatial and temporal mistakes. Always answer with a single JSON document and nothing else.";

inline constexpr std::string_view kDefaultGenerateTemplate =
    R"(Video prompt: "{prompt}"

Plan this video as {num_frames} frames. Describe each frame, generate layouts for each scene, and choose a background motion for each frame.

Rules:
- Coordinates are normalized to the canvas: x from 0 (left) to 1 (right), y from 0 (top) to 1 (bottom).
- A box is [x1, y1, x2, y2] with (x1, y1) the top-left and (x2, y2) the bottom-right corner.
- A box may extend past the canvas edge when the object is partly out of view.
- Object names carry the category plus attributes (for example "red car") and stay identical in every frame.
- The background direction is one of left, right, up, down, left_up, left_down, right_up, right_down, random. The speed goes from 0 (no movement) to 1.0 (rapid movement).
- Frame descriptions keep the same sentence structure from frame to frame.

Answer with JSON only, in exactly this shape:
{"prompt": "<video prompt>", "num_frames": <N>, "frames": [{"index": 0, "description": "<frame description>", "objects": [{"name": "<object>", "box": [x1, y1, x2, y2]}], "background": {"direction": "<direction>", "speed": <speed>}}]}
)";

inline constexpr std::string_view kDefaultGenerateExample =
    R"(Example (4 frames) for the prompt "a red ball rolling from left to right on grass":
{"prompt": "a red ball rolling from left to right on grass", "num_frames": 4, "frames": [
 {"index": 0, "description": "A red ball rests at the left side of a green lawn.", "objects": [{"name": "red ball", "box": [0.05, 0.60, 0.25, 0.80]}], "background": {"direction": "left", "speed": 0.2}},
 {"index": 1, "description": "A red ball rolls toward the middle of a green lawn.", "objects": [{"name": "red ball", "box": [0.25, 0.60, 0.45, 0.80]}], "background": {"direction": "left", "speed": 0.2}},
 {"index": 2, "description": "A red ball rolls past the middle of a green lawn.", "objects": [{"name": "red ball", "box": [0.45, 0.60, 0.65, 0.80]}], "background": {"direction": "left", "speed": 0.2}},
 {"index": 3, "description": "A red ball reaches the right side of a green lawn.", "objects": [{"name": "red ball", "box": [0.65, 0.60, 0.85, 0.80]}], "background": {"direction": "left", "speed": 0.2}}]})";

inline constexpr std::string_view kDefaultVerifyTemplate =
    R"(Video prompt: "{prompt}"

Here is a frame-by-frame plan with bounding boxes (x to the right, y downward, normalized to [0, 1]):
{dss_json}

Verify that the layouts agree with the frame descriptions, both spatially (where objects are, their relative placement) and temporally (how positions and sizes change across frames). Compare the actual box coordinates between frames and cite them. Then rate the alignment with a confidence score from 1 (badly misaligned) to 5 (fully aligned).

Answer with JSON only:
{"analysis": "<problems found, citing coordinates>", "suggestions": ["<specific fix>", ...], "confidence": <1-5>}
)";

inline constexpr std::string_view kDefaultVerifyExample =
    R"(Example feedback for "the sun gradually rises over the sea":
{"analysis": "The sun's box moves from y1 = 0.30 in frame 0 to y1 = 0.62 in frame 7, so it goes down while the descriptions say it rises.", "suggestions": ["Reverse the vertical motion: start the sun near y1 = 0.62 and end near y1 = 0.20.", "Keep the sun's width constant at about 0.18."], "confidence": 2})";

inline constexpr std::string_view kDefaultRectifyTemplate =
    R"(Video prompt: "{prompt}"

Current frame-by-frame plan:
{dss_json}

Reviewer feedback:
{feedback_json}

Correct the layouts and background motion so that they follow the feedback and the frame descriptions. Keep the number of frames, the frame descriptions and the object names unchanged. Answer with the complete corrected plan as JSON only, in the same shape as the current plan.
)";

inline constexpr std::string_view kDefaultRectifyExample =
    R"(Example: if the feedback says "the boat is above the river (y2 = 0.40) while the river spans y from 0.55 to 0.90", move every boat box down so that it sits on the river, e.g. from [0.30, 0.20, 0.55, 0.40] to [0.30, 0.55, 0.55, 0.75].)";

struct PromptTemplates {
  PromptTemplate generate;
  PromptTemplate verify;
  PromptTemplate rectify;
};

inline PromptTemplates default_templates() {
  return PromptTemplates{
      {TemplateName::kGenerate, std::string(kDefaultGenerateTemplate), std::string(kDefaultGenerateExample)},
      {TemplateName::kVerify, std::string(kDefaultVerifyTemplate), std::string(kDefaultVerifyExample)},
      {TemplateName::kRectify, std::string(kDefaultRectifyTemplate), std::string(kDefaultRectifyExample)},
  };
}

/// Overrides defaults with `<dir>/<name>.txt` and `<dir>/<name>.example.txt`
/// where present.
inline PromptTemplates load_templates(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
  PromptTemplates t = default_templates();
  for (PromptTemplate* p : {&t.generate, &t.verify, &t.rectify}) {
    const std::string base(to_string(p->name));
    if (auto f = dir / (base + ".txt"); std::filesystem::exists(f)) p->template_text = detail::read_file(f);
    if (auto f = dir / (base + ".example.txt"); std::filesystem::exists(f)) {
      p->in_context_example = detail::read_file(f);
    }
    validate(*p);
  }
  return t;
}

}  // namespace flowzero
