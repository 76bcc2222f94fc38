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

// The doctor, patient, judge, evaluator and extractor agents: each one renders
// its prompt, calls a backend, and parses the reply into a typed result.

#ifndef TRIAGE_AGENTS_HPP_
#define TRIAGE_AGENTS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "triage/backend.hpp"
#include "triage/core.hpp"
#include "triage/error.hpp"
#include "triage/prompts.hpp"
#include "triage/text.hpp"

namespace triage {

struct PatientReply {
  std::string text;
  bool wants_to_end = false;
};

struct HighLevelScores {
  double fluency = 0.0;
  double professionalism = 0.0;
  double safety = 0.0;

  friend bool operator==(const HighLevelScores&, const HighLevelScores&) = default;
};

struct ExtractionResult {
  std::set<DiagnosticLabel> labels;
  int dropped_lines = 0;
};

// ---------------------------------------------------------------------------
// Reply parsers. Each returns nullopt when the reply does not contain the
// requested machine-readable content at all.

/// The marker only counts inside the last 16 bytes of the trimmed reply.
/// An empty reply also ends the dialogue: the patient has stopped talking.
inline PatientReply parse_patient_reply(std::string_view raw) {
  constexpr std::size_t kTailWindow = 16;
  std::string body = text::trim(raw);
  if (body.empty()) return PatientReply{{}, true};
  const std::size_t tail_start = body.size() > kTailWindow ? body.size() - kTailWindow : 0;
  const std::size_t pos = body.rfind(kEndMarker);
  if (pos == std::string::npos || pos < tail_start) return PatientReply{std::move(body), false};
  body.erase(pos, kEndMarker.size());
  return PatientReply{text::trim(body), true};
}

namespace detail {

inline std::regex aspect_regex(std::string_view key_pattern) {
  return std::regex(std::string(R"(\b)") + std::string(key_pattern) +
                        R"([\s*_]*[:=][\s*_]*([+-]?\d+(?:\.\d+)?))",
                    std::regex::icase | std::regex::ECMAScript);
}

inline std::optional<double> find_aspect(const std::string& s, const std::regex& re) {
  std::smatch m;
  if (!std::regex_search(s, m, re)) return std::nullopt;
  const std::string digits = m[1].str();
  double v = 0;
  try {
    v = std::stod(digits);
  } catch (const std::out_of_range&) {
    v = digits.front() == '-' ? -1e6 : 1e6;
  }
  return std::clamp(v, -1e6, 1e6);
}

/// Line-wise first (first line carrying every aspect wins), then the whole
/// reply as one string for answers that put each aspect on its own line.
template <std::size_t K>
std::optional<std::array<double, K>> scan_aspects(std::string_view reply,
                                                  const std::array<const std::regex*, K>& res) {
  auto try_span = [&](const std::string& s) -> std::optional<std::array<double, K>> {
    std::array<double, K> out{};
    for (std::size_t k = 0; k < K; ++k) {
      auto v = find_aspect(s, *res[k]);
      if (!v) return std::nullopt;
      out[k] = *v;
    }
    return out;
  };
  for (std::string_view line : text::split_lines(reply)) {
    if (auto hit = try_span(std::string(line))) return hit;
  }
  return try_span(std::string(reply));
}

}  // namespace detail

/// Expects "logic: <n>, relevance: <n>" in any order, case or spacing.
/// Fractional scores round to the nearest integer; each aspect is clamped to
/// [0, 10].
inline std::optional<RankScore> parse_rank_score(std::string_view reply) {
  static const std::regex kLogic = detail::aspect_regex(R"(logic(?:al)?(?:\s+(?:score|correctness))?)");
  static const std::regex kRelevance = detail::aspect_regex(R"(relevance(?:\s+score)?)");
  auto hit = detail::scan_aspects<2>(reply, {&kLogic, &kRelevance});
  if (!hit) return std::nullopt;
  return RankScore::from_aspects(std::lround((*hit)[0]), std::lround((*hit)[1]));
}

inline std::optional<HighLevelScores> parse_highlevel_scores(std::string_view reply) {
  static const std::regex kFluency = detail::aspect_regex("fluency");
  static const std::regex kProfessionalism = detail::aspect_regex("professionalism");
  static const std::regex kSafety = detail::aspect_regex("safety");
  auto hit = detail::scan_aspects<3>(reply, {&kFluency, &kProfessionalism, &kSafety});
  if (!hit) return std::nullopt;
  auto clamp = [](double v) { return std::clamp(v, 0.0, 10.0); };
  return HighLevelScores{clamp((*hit)[0]), clamp((*hit)[1]), clamp((*hit)[2])};
}

/// One "category | item | status" finding per line; prose lines are skipped.
/// A three-field line whose category or status is not recognised is dropped
/// and counted. A "NONE" line is an explicit empty answer.
inline std::optional<ExtractionResult> parse_extraction(std::string_view reply) {
  static const std::regex kBullet(R"(^\s*(?:[-*•]|\d+[.)])\s+)");
  ExtractionResult out;
  bool answered = false;
  for (std::string_view raw_line : text::split_lines(reply)) {
    std::string line = std::regex_replace(std::string(raw_line), kBullet, "");
    line = text::trim(line);
    if (text::iequals(text::trim_view(line), "none") || text::iequals(line, "none.")) {
      answered = true;
      continue;
    }
    if (!line.empty() && line.front() == '|') line.erase(0, 1);
    if (!line.empty() && line.back() == '|') line.pop_back();
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t bar = line.find('|', start);
      fields.push_back(text::trim(std::string_view(line).substr(
          start, bar == std::string::npos ? std::string::npos : bar - start)));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    if (fields.size() != 3) continue;
    // Markdown table header and separator rows.
    if (text::iequals(fields[0], "category") && text::iequals(fields[2], "status")) continue;
    if (fields[0].find_first_not_of("-: ") == std::string::npos) continue;
    answered = true;
    auto cat = match_category(fields[0]);
    auto status = match_status(fields[2]);
    const std::string item = text::normalize_item(fields[1]);
    if (!cat || !status || item.empty()) {
      ++out.dropped_lines;
      continue;
    }
    out.labels.insert(DiagnosticLabel{*cat, item, *status});
  }
  if (!answered) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------

struct GenerationParams {
  int max_tokens = 256;
  double temperature = 0.7;
  std::optional<std::uint64_t> seed;
};

/// Stateless apart from configuration; safe to share across threads.
class Agents {
 public:
  /// Two re-prompts after the first attempt.
  static constexpr int kParseAttempts = 3;

  explicit Agents(PromptCatalog catalog = default_catalog(), GenerationParams params = {},
                  SpeakerLabels labels = {})
      : catalog_(std::move(catalog)), params_(params), labels_(std::move(labels)) {}

  const PromptCatalog& catalog() const { return catalog_; }
  const GenerationParams& params() const { return params_; }

  // Request builders. Exposed so fixtures can be scripted against the exact
  // prompts an agent sends.

  ChatRequest doctor_request(const Dialogue& d, const MedicalHistory& h, int candidate_number,
                             int candidate_count) const {
    return make_request(prompt_names::kDoctor, BackendRole::kDoctor,
                        {{"history", h.text},
                         {"transcript", render_transcript(d, labels_)},
                         {"candidate_number", std::to_string(candidate_number)},
                         {"candidate_count", std::to_string(candidate_count)}},
                        0);
  }

  ChatRequest patient_request(const Dialogue& d, const MedicalHistory& h) const {
    return make_request(prompt_names::kPatient, BackendRole::kPatient,
                        {{"history", h.text}, {"transcript", render_transcript(d, labels_)}}, 0);
  }

  ChatRequest judge_request(const Dialogue& d, const MedicalHistory& h, int attempt = 0) const {
    return make_request(prompt_names::kJudge, BackendRole::kJudge,
                        {{"history", h.text}, {"transcript", render_transcript(d, labels_)}},
                        attempt);
  }

  ChatRequest highlevel_request(const Dialogue& d, int attempt = 0) const {
    return make_request(prompt_names::kHighLevel, BackendRole::kJudge,
                        {{"transcript", render_transcript(d, labels_)}}, attempt);
  }

  ChatRequest extractor_request(const Dialogue& d, int attempt = 0) const {
    return make_request(prompt_names::kExtractor, BackendRole::kExtractor,
                        {{"transcript", render_transcript(d, labels_)}}, attempt);
  }

  ChatRequest history_request(const std::set<DiagnosticLabel>& labels) const {
    std::string listing;
    for (const auto& l : labels) {
      if (!listing.empty()) listing += "\n";
      listing += std::string(category_name(l.category)) + " | " + l.item + " | " +
                 std::string(status_name(l.status));
    }
    if (listing.empty()) listing = "(no recorded findings)";
    return make_request(prompt_names::kHistory, BackendRole::kPatient, {{"labels", listing}}, 0);
  }

  // Agent operations.

  /// Exactly n non-empty candidates. Duplicates are replaced by up to two
  /// extra batches of drafts; whatever is still missing is filled with the
  /// duplicates in arrival order.
  std::vector<std::string> doctor_candidates(Backend& backend, const Dialogue& d,
                                             const MedicalHistory& h, int n) const {
    if (n < 1) throw Error(ErrorCode::kPrecondition, "candidate count must be >= 1");
    if (d.terminated()) throw Error(ErrorCode::kDialogueTerminated, d.id());
    if (d.last().role != Role::kPatient) throw Error(ErrorCode::kLastTurnNotPatient, d.id());

    constexpr int kExtraBatches = 2;
    std::vector<std::string> unique;
    std::vector<std::string> spare;
    int next_draft = 1;
    auto draw = [&](int count) {
      for (int k = 0; k < count; ++k) {
        std::string reply = text::trim(
            backend.complete(doctor_request(d, h, next_draft++, n)).text);
        if (reply.empty()) continue;
        if (std::find(unique.begin(), unique.end(), reply) == unique.end()) {
          unique.push_back(std::move(reply));
        } else {
          spare.push_back(std::move(reply));
        }
      }
    };
    draw(n);
    for (int batch = 0; batch < kExtraBatches && static_cast<int>(unique.size()) < n; ++batch) {
      try {
        draw(n - static_cast<int>(unique.size()));
      } catch (const Error& e) {
        // A fixture has no refill drafts; keep what we have.
        if (e.code() != ErrorCode::kScriptMiss) throw;
        break;
      }
    }
    if (unique.empty()) throw Error(ErrorCode::kEmptyUtterance, "doctor produced no candidates");
    std::vector<std::string> out(unique.begin(),
                                 unique.begin() + std::min<std::size_t>(unique.size(), n));
    for (std::size_t i = 0; static_cast<int>(out.size()) < n; ++i) {
      out.push_back(spare.empty() ? unique[i % unique.size()] : spare[i % spare.size()]);
    }
    return out;
  }

  PatientReply patient_respond(Backend& backend, const Dialogue& d, const MedicalHistory& h) const {
    if (d.last().role != Role::kDoctor) throw Error(ErrorCode::kLastTurnNotDoctor, d.id());
    return parse_patient_reply(backend.complete(patient_request(d, h)).text);
  }

  /// Returns the sentinel score when no attempt parses.
  RankScore judge_score(Backend& backend, const Dialogue& d, const MedicalHistory& h) const {
    for (int attempt = 0; attempt < kParseAttempts; ++attempt) {
      if (auto s = parse_rank_score(backend.complete(judge_request(d, h, attempt)).text)) return *s;
    }
    return RankScore::unparseable();
  }

  HighLevelScores highlevel_scores(Backend& backend, const Dialogue& d) const {
    for (int attempt = 0; attempt < kParseAttempts; ++attempt) {
      if (auto s = parse_highlevel_scores(backend.complete(highlevel_request(d, attempt)).text)) {
        return *s;
      }
    }
    throw Error(ErrorCode::kScoreParseFailure, "high-level scores for " + d.id());
  }

  ExtractionResult extract_diagnostics(Backend& backend, const Dialogue& d) const {
    for (int attempt = 0; attempt < kParseAttempts; ++attempt) {
      if (auto r = parse_extraction(backend.complete(extractor_request(d, attempt)).text)) return *r;
    }
    throw Error(ErrorCode::kExtractParseFailure, d.id());
  }

 private:
  ChatRequest make_request(std::string_view template_name, BackendRole role,
                           const std::map<std::string, std::string>& bindings, int attempt) const {
    RenderedPrompt p = render_prompt(catalog_.get(template_name), bindings);
    ChatRequest req;
    req.system_prompt = std::move(p.system);
    req.user_prompt = std::move(p.user);
    req.max_tokens = params_.max_tokens;
    req.temperature = params_.temperature;
    req.role = role;
    // Re-prompts vary only the seed, so a scripted backend answers them with
    // the same entry.
    if (params_.seed) {
      req.seed = *params_.seed + static_cast<std::uint64_t>(attempt);
    } else if (attempt > 0) {
      req.seed = static_cast<std::uint64_t>(attempt);
    }
    return req;
  }

  PromptCatalog catalog_;
  GenerationParams params_;
  SpeakerLabels labels_;
};

}  // namespace triage

#endif  // TRIAGE_AGENTS_HPP_
