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

// Chat-completion backends. Agents talk to a Backend; which one sits behind it
// (live HTTP, a scripted fixture, a seeded sampler) is a configuration detail.

#ifndef TRIAGE_BACKEND_HPP_
#define TRIAGE_BACKEND_HPP_

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"
#include "triage/text.hpp"

namespace triage {

enum class BackendRole { kDoctor, kPatient, kJudge, kExtractor };

inline std::string_view backend_role_name(BackendRole r) {
  switch (r) {
    case BackendRole::kDoctor: return "doctor";
    case BackendRole::kPatient: return "patient";
    case BackendRole::kJudge: return "judge";
    case BackendRole::kExtractor: return "extractor";
  }
  return "doctor";
}

inline BackendRole parse_backend_role(std::string_view s) {
  for (BackendRole r : {BackendRole::kDoctor, BackendRole::kPatient, BackendRole::kJudge,
                        BackendRole::kExtractor}) {
    if (text::iequals(s, backend_role_name(r))) return r;
  }
  throw Error(ErrorCode::kSchemaError, "unknown backend role '" + std::string(s) + "'");
}

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  int max_tokens = 256;
  double temperature = 0.7;
  std::optional<std::uint64_t> seed;
  BackendRole role = BackendRole::kDoctor;
};

inline void validate(const ChatRequest& req) {
  if (text::trim_view(req.user_prompt).empty()) {
    throw Error(ErrorCode::kPrecondition, "user prompt is empty");
  }
  if (req.max_tokens <= 0) throw Error(ErrorCode::kPrecondition, "max_tokens must be > 0");
  if (!(req.temperature >= 0.0)) throw Error(ErrorCode::kPrecondition, "temperature must be >= 0");
}

struct TokenLogProb {
  std::string token;
  double logprob = 0.0;

  friend bool operator==(const TokenLogProb&, const TokenLogProb&) = default;
};

/// When token_logprobs is present the tokens concatenate (no separator) to
/// exactly `text`.
struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogProb>> token_logprobs;
  std::string backend_id;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

inline bool logprobs_consistent(std::string_view text,
                                const std::vector<TokenLogProb>& tokens) {
  std::string joined;
  for (const auto& t : tokens) {
    if (!(t.logprob <= 0.0)) return false;
    joined += t.token;
  }
  return joined == text;
}

/// Negative log-likelihood of a generated sequence: -sum(log p).
inline double sequence_nll(std::span<const double> logprobs) {
  if (logprobs.empty()) throw Error(ErrorCode::kEmptySequence, "no log-probabilities");
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!(lp <= 0.0)) {
      throw Error(ErrorCode::kInvalidLogProb, "log-probability " + std::to_string(lp) + " > 0");
    }
    sum += lp;
  }
  return -sum;
}

inline double sequence_nll(const std::vector<TokenLogProb>& tokens) {
  std::vector<double> lps;
  lps.reserve(tokens.size());
  for (const auto& t : tokens) lps.push_back(t.logprob);
  return sequence_nll(std::span<const double>(lps));
}

class Backend {
 public:
  virtual ~Backend() = default;
  /// Thread-safe.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual std::string id() const = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

// ---------------------------------------------------------------------------
// Scripted backend

struct ScriptKey {
  BackendRole role = BackendRole::kDoctor;
  std::string digest;

  friend auto operator<=>(const ScriptKey&, const ScriptKey&) = default;
};

inline std::string prompt_digest(std::string_view system_prompt, std::string_view user_prompt) {
  return text::hex64(text::Fnv1a64().field(system_prompt).field(user_prompt).value());
}

/// Any change to a prompt template changes the key, so stale fixtures fail
/// loudly with ScriptMiss instead of silently matching.
inline ScriptKey script_key(const ChatRequest& req) {
  return ScriptKey{req.role, prompt_digest(req.system_prompt, req.user_prompt)};
}

struct ScriptEntry {
  std::string text;
  std::optional<std::vector<TokenLogProb>> logprobs;
};

inline nlohmann::json script_entry_json(const ScriptKey& key, const ScriptEntry& e) {
  nlohmann::json j{{"role", backend_role_name(key.role)}, {"key", key.digest}, {"response", e.text}};
  if (e.logprobs) {
    auto arr = nlohmann::json::array();
    for (const auto& t : *e.logprobs) arr.push_back(nlohmann::json::array({t.token, t.logprob}));
    j["logprobs"] = std::move(arr);
  }
  return j;
}

/// Pure lookup table from (role, prompt digest) to a canned reply.
/// Registration must finish before concurrent complete() calls begin.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::string id = "scripted") : id_(std::move(id)) {}

  void register_response(const ScriptKey& key, std::string response,
                         std::optional<std::vector<TokenLogProb>> logprobs = std::nullopt,
                         bool overwrite = false) {
    if (logprobs && !logprobs_consistent(response, *logprobs)) {
      throw Error(ErrorCode::kPrecondition, "logprob tokens do not join to the response text");
    }
    if (!overwrite && entries_.count(key) > 0) {
      throw Error(ErrorCode::kDuplicateKey,
                  std::string(backend_role_name(key.role)) + ":" + key.digest);
    }
    entries_[key] = ScriptEntry{std::move(response), std::move(logprobs)};
  }

  void register_response(const ChatRequest& req, std::string response,
                         std::optional<std::vector<TokenLogProb>> logprobs = std::nullopt,
                         bool overwrite = false) {
    register_response(script_key(req), std::move(response), std::move(logprobs), overwrite);
  }

  bool contains(const ScriptKey& key) const { return entries_.count(key) > 0; }
  std::size_t size() const { return entries_.size(); }

  ChatResponse complete(const ChatRequest& req) override {
    validate(req);
    const ScriptKey key = script_key(req);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw Error(ErrorCode::kScriptMiss,
                  std::string(backend_role_name(key.role)) + ":" + key.digest);
    }
    return ChatResponse{it->second.text, it->second.logprobs, id_};
  }

  std::string id() const override { return id_; }

  nlohmann::json to_json() const {
    auto entries = nlohmann::json::array();
    for (const auto& [key, e] : entries_) entries.push_back(script_entry_json(key, e));
    return nlohmann::json{{"entries", std::move(entries)}};
  }

  /// Entries carry either a precomputed "key" or the literal "system"/"user"
  /// prompts, from which the key is derived.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& j, std::string id) {
    auto backend = std::make_shared<ScriptedBackend>(std::move(id));
    try {
      for (const auto& e : j.at("entries")) {
        ScriptKey key;
        key.role = parse_backend_role(e.at("role").get<std::string>());
        if (e.contains("key")) {
          key.digest = e["key"].get<std::string>();
        } else {
          key.digest = prompt_digest(e.value("system", std::string{}), e.at("user").get<std::string>());
        }
        std::optional<std::vector<TokenLogProb>> lps;
        if (e.contains("logprobs")) {
          lps.emplace();
          for (const auto& t : e["logprobs"]) {
            lps->push_back(TokenLogProb{t.at(0).get<std::string>(), t.at(1).get<double>()});
          }
        }
        backend->register_response(key, e.at("response").get<std::string>(), std::move(lps));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kSchemaError, std::string("script file: ") + ex.what());
    }
    return backend;
  }

  static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path, std::string id) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kFileUnreadable, path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kSchemaError, path.string() + ": " + ex.what());
    }
    return from_json(j, std::move(id));
  }

 private:
  std::string id_;
  std::map<ScriptKey, ScriptEntry> entries_;
};

// ---------------------------------------------------------------------------
// Seeded sampler

/// Offline stand-in for a model: the reply is a pure function of the
/// configured seed and the full request. Replies follow the machine-readable
/// formats the agents ask for, drawn from a small clinical vocabulary.
/// Randomness is taken straight from mt19937_64 (whose output sequence is
/// fixed by the standard) rather than std distributions, which vary by
/// standard library.
class SeededSampler : public Backend {
 public:
  explicit SeededSampler(std::uint64_t seed, std::string id = "seeded-sampler")
      : seed_(seed), id_(std::move(id)) {}

  ChatResponse complete(const ChatRequest& req) override {
    validate(req);
    text::Fnv1a64 h;
    h.field(std::to_string(seed_))
        .field(req.seed ? std::to_string(*req.seed) : "-")
        .field(backend_role_name(req.role))
        .field(req.system_prompt)
        .field(req.user_prompt);
    std::mt19937_64 rng(h.value());
    std::string body;
    switch (req.role) {
      case BackendRole::kDoctor: body = doctor_reply(rng); break;
      case BackendRole::kPatient: body = patient_reply(rng, req); break;
      case BackendRole::kJudge: body = judge_reply(rng); break;
      case BackendRole::kExtractor: body = extractor_reply(rng); break;
    }
    return ChatResponse{body, tokenize_with_logprobs(body, rng), id_};
  }

  std::string id() const override { return id_; }

 private:
  template <std::size_t K>
  static std::string_view pick(std::mt19937_64& rng, const std::array<std::string_view, K>& xs) {
    return xs[rng() % K];
  }

  static constexpr std::array<std::string_view, 16> kTopics = {
      "chest pain",    "palpitations",      "shortness of breath", "dizziness",
      "cough",         "fever",             "headache",            "nausea",
      "fatigue",       "swelling in the legs", "irregular heartbeat", "chest tightness",
      "back pain",     "blurred vision",    "night sweats",        "abdominal pain"};
  static constexpr std::array<std::string_view, 8> kTests = {
      "ecg", "echocardiogram", "blood test", "chest x-ray",
      "ct scan", "holter monitor", "ultrasound", "blood pressure check"};

  static std::string doctor_reply(std::mt19937_64& rng) {
    static constexpr std::array<std::string_view, 8> kForms = {
        "How long have you had the {}?",
        "Is the {} worse at night or during exercise?",
        "Have you had a {} recently?",
        "Does the {} come and go, or is it constant?",
        "Have you had any surgery before, and do you still feel the {}?",
        "Can you describe the {} in more detail?",
        "Did the {} start suddenly?",
        "Besides the {}, have you noticed anything else?"};
    std::string_view form = pick(rng, kForms);
    std::string_view topic = form.find("had a {}") != std::string_view::npos ? pick(rng, kTests)
                                                                              : pick(rng, kTopics);
    std::string out(form);
    out.replace(out.find("{}"), 2, topic);
    return out;
  }

  static std::string patient_reply(std::mt19937_64& rng, const ChatRequest& req) {
    static constexpr std::array<std::string_view, 8> kForms = {
        "About two weeks, and the {} is worse at night.",
        "Yes, I also have some {}.",
        "No, I have not noticed any {}.",
        "It started suddenly with {} after climbing stairs.",
        "I had a {} last year and it was normal.",
        "The {} comes and goes, mostly in the morning.",
        "Should I be worried about the {}?",
        "I think the {} began after I changed my medication."};
    std::string_view form = pick(rng, kForms);
    std::string_view topic = form.find("had a {}") != std::string_view::npos ? pick(rng, kTests)
                                                                              : pick(rng, kTopics);
    std::string out(form);
    out.replace(out.find("{}"), 2, topic);
    // Only a prompt that explains the end marker can elicit it.
    const bool marker_known = req.system_prompt.find("[END]") != std::string::npos ||
                              req.user_prompt.find("[END]") != std::string::npos;
    if (marker_known && rng() % 4 == 0) out += " Thank you, doctor. [END]";
    return out;
  }

  static std::string fixed1(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
  }

  static std::string judge_reply(std::mt19937_64& rng) {
    auto score = [&] { return 1 + static_cast<int>(rng() % 10); };
    auto real = [&] { return 1.0 + static_cast<double>(rng() % 91) / 10.0; };
    const int logic = score();
    const int relevance = score();
    const double f = real(), p = real(), s = real();
    return "logic: " + std::to_string(logic) + ", relevance: " + std::to_string(relevance) +
           "\nfluency: " + fixed1(f) + ", professionalism: " + fixed1(p) + ", safety: " + fixed1(s);
  }

  static std::string extractor_reply(std::mt19937_64& rng) {
    static constexpr std::array<std::string_view, 4> kCats = {"symptom", "surgery", "test",
                                                              "other_info"};
    static constexpr std::array<std::string_view, 6> kOther = {
        "smoking", "alcohol use", "family history of heart disease", "hypertension",
        "diabetes", "allergy to penicillin"};
    static constexpr std::array<std::string_view, 4> kSurgery = {
        "appendectomy", "stent placement", "bypass surgery", "knee replacement"};
    const std::size_t n = rng() % 5;
    if (n == 0) return "NONE";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      std::string_view cat = pick(rng, kCats);
      std::string_view item = cat == "symptom" ? pick(rng, kTopics)
                              : cat == "test"  ? pick(rng, kTests)
                              : cat == "surgery" ? pick(rng, kSurgery)
                                                 : pick(rng, kOther);
      if (!out.empty()) out += "\n";
      out += std::string(cat) + " | " + std::string(item) + " | " +
             (rng() % 3 == 0 ? "negative" : "positive");
    }
    return out;
  }

  static std::vector<TokenLogProb> tokenize_with_logprobs(const std::string& body,
                                                          std::mt19937_64& rng) {
    std::vector<TokenLogProb> out;
    std::size_t i = 0;
    while (i < body.size()) {
      std::size_t j = i;
      while (j < body.size() && text::is_space(body[j])) ++j;
      while (j < body.size() && !text::is_space(body[j])) ++j;
      // logprob in [-3.01, -0.01]
      const double lp = -(0.01 + static_cast<double>(rng() % 301) / 100.0);
      out.push_back(TokenLogProb{body.substr(i, j - i), lp});
      i = j;
    }
    return out;
  }

  std::uint64_t seed_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Decorators

/// Counts completed and attempted calls per request role.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(BackendPtr inner) : inner_(std::move(inner)) {}

  ChatResponse complete(const ChatRequest& req) override {
    counts_[static_cast<std::size_t>(req.role)].fetch_add(1, std::memory_order_relaxed);
    return inner_->complete(req);
  }
  std::string id() const override { return inner_->id(); }

  std::size_t calls(BackendRole r) const {
    return counts_[static_cast<std::size_t>(r)].load(std::memory_order_relaxed);
  }
  std::size_t total_calls() const {
    std::size_t sum = 0;
    for (const auto& c : counts_) sum += c.load(std::memory_order_relaxed);
    return sum;
  }

 private:
  BackendPtr inner_;
  std::array<std::atomic<std::size_t>, 4> counts_{};
};

/// Passes calls through and remembers every exchange, so a run against a live
/// or sampled backend can be frozen into a scripted fixture.
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(BackendPtr inner) : inner_(std::move(inner)) {}

  ChatResponse complete(const ChatRequest& req) override {
    ChatResponse resp = inner_->complete(req);
    std::lock_guard<std::mutex> lock(mu_);
    recorded_.try_emplace(script_key(req), ScriptEntry{resp.text, resp.token_logprobs});
    return resp;
  }
  std::string id() const override { return inner_->id(); }

  /// Same layout as ScriptedBackend::to_json; entries sorted by key.
  nlohmann::json script_json() const {
    std::lock_guard<std::mutex> lock(mu_);
    auto entries = nlohmann::json::array();
    for (const auto& [key, e] : recorded_) entries.push_back(script_entry_json(key, e));
    return nlohmann::json{{"entries", std::move(entries)}};
  }

 private:
  BackendPtr inner_;
  mutable std::mutex mu_;
  std::map<ScriptKey, ScriptEntry> recorded_;
};

// ---------------------------------------------------------------------------
// Configuration

struct BackendConfig {
  enum class Kind { kHttp, kScripted, kSeededSampler };

  Kind kind = Kind::kSeededSampler;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> model_name;
  std::optional<std::string> api_key_env_var;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  int max_in_flight = 4;
  bool request_logprobs = false;
  std::optional<std::filesystem::path> script_path;
  std::uint64_t seed = 0;
};

inline void validate(const BackendConfig& cfg) {
  using Kind = BackendConfig::Kind;
  if (cfg.kind == Kind::kHttp && (!cfg.endpoint_url || !cfg.model_name)) {
    throw Error(ErrorCode::kInvalidConfig, "http backend needs endpoint_url and model_name");
  }
  if (cfg.kind == Kind::kScripted && !cfg.script_path) {
    throw Error(ErrorCode::kInvalidConfig, "scripted backend needs script_path");
  }
  if (cfg.max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "max_retries must be >= 0");
  if (cfg.max_in_flight < 1) throw Error(ErrorCode::kInvalidConfig, "max_in_flight must be >= 1");
  if (cfg.timeout.count() <= 0) throw Error(ErrorCode::kInvalidConfig, "timeout must be > 0");
}

/// Relative script paths resolve against `base_dir` (the config file's
/// directory).
inline BackendConfig backend_config_from_json(const nlohmann::json& j,
                                              const std::filesystem::path& base_dir = {}) {
  using Kind = BackendConfig::Kind;
  BackendConfig cfg;
  try {
    const std::string kind = text::ascii_lower(j.at("kind").get<std::string>());
    if (kind == "http") cfg.kind = Kind::kHttp;
    else if (kind == "scripted") cfg.kind = Kind::kScripted;
    else if (kind == "seeded_sampler") cfg.kind = Kind::kSeededSampler;
    else throw Error(ErrorCode::kInvalidConfig, "unknown backend kind '" + kind + "'");
    if (j.contains("endpoint_url")) cfg.endpoint_url = j["endpoint_url"].get<std::string>();
    if (j.contains("model_name")) cfg.model_name = j["model_name"].get<std::string>();
    if (j.contains("api_key_env_var")) cfg.api_key_env_var = j["api_key_env_var"].get<std::string>();
    if (j.contains("timeout_ms")) cfg.timeout = std::chrono::milliseconds(j["timeout_ms"].get<long>());
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
    cfg.request_logprobs = j.value("request_logprobs", cfg.request_logprobs);
    if (j.contains("script_path")) {
      std::filesystem::path p = j["script_path"].get<std::string>();
      cfg.script_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  validate(cfg);
  return cfg;
}

}  // namespace triage

#endif  // TRIAGE_BACKEND_HPP_
