// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <regex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "flowzero/error.hpp"
#include "flowzero/llm.hpp"

namespace flowzero {

inline constexpr const char* kApiKeyEnv = "FLOWZERO_API_KEY";
inline constexpr const char* kApiBaseEnv = "FLOWZERO_API_BASE";
inline constexpr const char* kDefaultApiBase = "https://api.openai.com/v1";

struct RetryPolicy {
  int max_retries = 3;  // attempts = max_retries + 1
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  std::chrono::milliseconds delay_for(int retry) const {  // retry is 1-based
    double ms = static_cast<double>(initial_delay.count());
    for (int i = 1; i < retry; ++i) ms *= multiplier;
    return std::chrono::milliseconds(
        static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
  }
};

/// Client for an OpenAI-compatible `POST {base}/chat/completions` endpoint.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff. 401/403 raise AuthError and other 4xx raise RequestError, both
/// without retrying. Stateless between calls, so one instance can serve
/// several threads.
class OpenAiClient : public LlmClient {
 public:
  struct Options {
    std::string base_url = kDefaultApiBase;
    std::string api_key;
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  };

  /// Reads FLOWZERO_API_KEY (required) and FLOWZERO_API_BASE (optional).
  static Options options_from_env() {
    Options o;
    const char* key = std::getenv(kApiKeyEnv);
    if (!key || !*key) {
      throw ConfigError(std::string(kApiKeyEnv) + " is not set; export an API key or use --mock/--replay");
    }
    o.api_key = key;
    if (const char* base = std::getenv(kApiBaseEnv); base && *base) o.base_url = base;
    return o;
  }

  explicit OpenAiClient(Options options) : options_(std::move(options)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(options_.base_url, m, url_re)) {
      throw ConfigError("API base URL must look like http(s)://host[:port][/path], got " + options_.base_url);
    }
    origin_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : std::string();
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) {
      throw ConfigError("https endpoints need a build with OpenSSL support");
    }
#endif
  }

  std::string complete(const ChatRequest& request) override {
    validate(request);
    const std::string body = to_wire_json(request).dump();
    std::string last_error;
    const int attempts = options_.retry.max_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      if (attempt > 1) options_.sleep(options_.retry.delay_for(attempt - 1));

      httplib::Client cli(origin_);
      cli.set_connection_timeout(options_.timeout);
      cli.set_read_timeout(options_.timeout);
      cli.set_write_timeout(options_.timeout);
      httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};
      auto res = cli.Post(path_, headers, body, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      const int status = res->status;
      if (status == 200) return extract_content(res->body);
      if (status == 401 || status == 403) {
        throw AuthError("endpoint rejected the credential (HTTP " + std::to_string(status) + ")");
      }
      if (status == 429 || status >= 500) {
        last_error = "HTTP " + std::to_string(status);
        continue;
      }
      throw RequestError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 512));
    }
    throw TransportError(last_error + " after " + std::to_string(attempts) + " attempt(s)");
  }

  const std::string& origin() const { return origin_; }
  const std::string& path() const { return path_; }

 private:
  static std::string extract_content(const std::string& body) {
    try {
      auto doc = nlohmann::json::parse(body);
      const auto& content = doc.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw RequestError("response content is not a string");
      return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw RequestError(std::string("malformed chat-completions response: ") + e.what());
    }
  }

  Options options_;
  std::string origin_;
  std::string path_;
};

}  // namespace flowzero
