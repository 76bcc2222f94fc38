// Copyright 2026 The Triage Loop Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Live chat-completion backend speaking the common "messages in, choices
// out" JSON protocol over HTTP(S). See docs/protocol.md for the wire format.

#ifndef TRIAGE_HTTP_BACKEND_HPP_
#define TRIAGE_HTTP_BACKEND_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "triage/backend.hpp"
#include "triage/error.hpp"

namespace triage {

struct HttpReply {
  int status = 0;  // 0 means the request never completed (connect/read failure)
  std::string body;
  std::string transport_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpReply post(const std::string& url, const httplib::Headers& headers,
                         const std::string& body, std::chrono::milliseconds timeout) = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint_url lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return ParsedUrl{url, "/"};
  return ParsedUrl{url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public HttpTransport {
 public:
  HttpReply post(const std::string& url, const httplib::Headers& headers, const std::string& body,
                 std::chrono::milliseconds timeout) override {
    const ParsedUrl parsed = split_url(url);
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(parsed.path, headers, body, "application/json");
    if (!res) return HttpReply{0, {}, httplib::to_string(res.error())};
    return HttpReply{res->status, res->body, {}};
  }
};

/// Counting semaphore with a runtime limit.
class InFlightGate {
 public:
  explicit InFlightGate(int limit) : available_(limit) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++available_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

inline nlohmann::json chat_request_body(const ChatRequest& req, const std::string& model,
                                        bool request_logprobs) {
  nlohmann::json body{
      {"model", model},
      {"messages", nlohmann::json::array({
                       {{"role", "system"}, {"content", req.system_prompt}},
                       {{"role", "user"}, {"content", req.user_prompt}},
                   })},
      {"max_tokens", req.max_tokens},
      {"temperature", req.temperature},
  };
  if (req.seed) body["seed"] = *req.seed;
  if (request_logprobs) body["logprobs"] = true;
  return body;
}

inline ChatResponse parse_chat_response(const std::string& raw, const std::string& backend_id) {
  try {
    const auto j = nlohmann::json::parse(raw);
    const auto& choice = j.at("choices").at(0);
    ChatResponse out;
    out.backend_id = backend_id;
    const auto& content = choice.at("message").at("content");
    out.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<TokenLogProb> tokens;
      for (const auto& t : choice["logprobs"]["content"]) {
        tokens.push_back(TokenLogProb{t.at("token").get<std::string>(), t.at("logprob").get<double>()});
      }
      if (logprobs_consistent(out.text, tokens)) out.token_logprobs = std::move(tokens);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBackendRefusal, std::string("malformed completion body: ") + e.what());
  }
}

/// Retries transport failures, 408, 429 and 5xx up to max_retries times with
/// full-jitter exponential backoff (base 500 ms, factor 2). Any other non-2xx
/// status is an application-level refusal and is not retried.
class HttpBackend : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(BackendConfig cfg, std::shared_ptr<HttpTransport> transport = nullptr,
                       Sleeper sleeper = nullptr)
      : cfg_(std::move(cfg)),
        transport_(transport ? std::move(transport) : std::make_shared<HttplibTransport>()),
        sleeper_(sleeper ? std::move(sleeper)
                         : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
        gate_(cfg_.max_in_flight) {
    validate(cfg_);
    if (cfg_.kind != BackendConfig::Kind::kHttp) {
      throw Error(ErrorCode::kInvalidConfig, "HttpBackend needs an http config");
    }
  }

  static constexpr std::chrono::milliseconds kBackoffBase{500};

  ChatResponse complete(const ChatRequest& req) override {
    validate(req);
    const std::string body = chat_request_body(req, *cfg_.model_name, cfg_.request_logprobs).dump();
    httplib::Headers headers;
    if (cfg_.api_key_env_var) {
      if (const char* key = std::getenv(cfg_.api_key_env_var->c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }

    std::string last_failure;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) sleeper_(backoff_delay(attempt - 1));
      HttpReply reply;
      gate_.acquire();
      try {
        reply = transport_->post(*cfg_.endpoint_url, headers, body, cfg_.timeout);
      } catch (...) {
        gate_.release();
        throw;
      }
      gate_.release();

      if (reply.status >= 200 && reply.status < 300) return parse_chat_response(reply.body, id());
      if (reply.status == 0 || reply.status == 408 || reply.status == 429 || reply.status >= 500) {
        last_failure = reply.status == 0 ? reply.transport_error
                                         : "HTTP " + std::to_string(reply.status);
        continue;
      }
      throw Error(ErrorCode::kBackendRefusal,
                  "HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
    }
    throw Error(ErrorCode::kTransportError,
                *cfg_.endpoint_url + " failed after " + std::to_string(cfg_.max_retries + 1) +
                    " attempts (" + last_failure + ")");
  }

  std::string id() const override { return "http:" + *cfg_.model_name; }

  /// Uniform in [0, base * 2^retry].
  std::chrono::milliseconds backoff_delay(int retry) {
    const long cap = kBackoffBase.count() << std::min(retry, 16);
    std::lock_guard<std::mutex> lock(rng_mu_);
    return std::chrono::milliseconds(static_cast<long>(jitter_() % static_cast<unsigned long>(cap + 1)));
  }

 private:
  BackendConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  InFlightGate gate_;
  std::mutex rng_mu_;
  std::mt19937_64 jitter_{std::random_device{}()};
};

/// Builds the backend a config describes.
inline BackendPtr make_backend(const BackendConfig& cfg, const std::string& name) {
  validate(cfg);
  switch (cfg.kind) {
    case BackendConfig::Kind::kHttp: return std::make_shared<HttpBackend>(cfg);
    case BackendConfig::Kind::kScripted: return ScriptedBackend::load(*cfg.script_path, "scripted:" + name);
    case BackendConfig::Kind::kSeededSampler:
      return std::make_shared<SeededSampler>(cfg.seed, "seeded:" + name);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown backend kind");
}

}  // namespace triage

#endif  // TRIAGE_HTTP_BACKEND_HPP_
