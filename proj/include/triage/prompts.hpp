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

// Prompt templates with {name} placeholders, and the catalog of templates the
// agents use. Templates are data: the catalog directory overrides the
// built-in defaults file by file.

#ifndef TRIAGE_PROMPTS_HPP_
#define TRIAGE_PROMPTS_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "triage/error.hpp"
#include "triage/text.hpp"

namespace triage {

namespace detail {

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

/// Length of the placeholder starting at s[i] ("{name}"), or 0 if none.
inline std::size_t placeholder_at(std::string_view s, std::size_t i) {
  if (s[i] != '{' || i + 1 >= s.size() || !is_ident_start(s[i + 1])) return 0;
  std::size_t j = i + 2;
  while (j < s.size() && is_ident_char(s[j])) ++j;
  return j < s.size() && s[j] == '}' ? j - i + 1 : 0;
}

inline void collect_placeholders(std::string_view s, std::set<std::string>& out) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::size_t len = placeholder_at(s, i)) {
      out.emplace(s.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
}

inline std::string substitute(std::string_view s, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::size_t len = placeholder_at(s, i)) {
      const std::string name(s.substr(i + 1, len - 2));
      auto it = bindings.find(name);
      if (it == bindings.end()) throw Error(ErrorCode::kMissingBinding, name);
      out += it->second;
      i += len - 1;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace detail

class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string system_text, std::string user_text)
      : name_(std::move(name)), system_(std::move(system_text)), user_(std::move(user_text)) {
    detail::collect_placeholders(system_, required_);
    detail::collect_placeholders(user_, required_);
  }

  const std::string& name() const { return name_; }
  const std::string& system_text() const { return system_; }
  const std::string& user_text() const { return user_; }
  const std::set<std::string>& required_bindings() const { return required_; }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  std::string name_;
  std::string system_;
  std::string user_;
  std::set<std::string> required_;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

/// Single pass: text coming from a binding is never scanned again, so a value
/// that itself looks like "{x}" is emitted literally.
inline RenderedPrompt render_prompt(const PromptTemplate& t,
                                    const std::map<std::string, std::string>& bindings) {
  for (const auto& name : t.required_bindings()) {
    if (bindings.count(name) == 0) throw Error(ErrorCode::kMissingBinding, name);
  }
  return RenderedPrompt{detail::substitute(t.system_text(), bindings),
                        detail::substitute(t.user_text(), bindings)};
}

// ---------------------------------------------------------------------------
// Catalog

namespace prompt_names {
inline constexpr std::string_view kDoctor = "doctor";
inline constexpr std::string_view kPatient = "patient";
inline constexpr std::string_view kJudge = "judge";
inline constexpr std::string_view kConsistency = "consistency";
inline constexpr std::string_view kNursing = "nursing";
inline constexpr std::string_view kHighLevel = "highlevel";
inline constexpr std::string_view kExtractor = "extractor";
inline constexpr std::string_view kHistory = "history";
}  // namespace prompt_names

/// The text appended by the patient agent when it has nothing more to say.
inline constexpr std::string_view kEndMarker = "[END]";

class PromptCatalog {
 public:
  const PromptTemplate& get(std::string_view name) const {
    auto it = templates_.find(std::string(name));
    if (it == templates_.end()) {
      throw Error(ErrorCode::kInvalidConfig, "prompt catalog has no '" + std::string(name) + "'");
    }
    return it->second;
  }
  void put(PromptTemplate t) {
    std::string name = t.name();
    templates_.insert_or_assign(std::move(name), std::move(t));
  }
  const std::map<std::string, PromptTemplate>& all() const { return templates_; }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

inline PromptCatalog default_catalog() {
  PromptCatalog c;
  c.put(PromptTemplate(
      std::string(prompt_names::kDoctor),
      "You are an experienced physician conducting a diagnostic interview. Your goal is to "
      "proactively collect diagnostic information: symptoms, previous surgery, medical tests, "
      "and other relevant information such as habits and family history. Ask one focused, "
      "clinically relevant question at a time. Do not give a diagnosis yet.",
      "Medical history of the patient:\n{history}\n\n"
      "Conversation so far:\n{transcript}\n\n"
      "Write the doctor's next message (draft {candidate_number} of {candidate_count}). "
      "Reply with the message only."));
  c.put(PromptTemplate(
      std::string(prompt_names::kPatient),
      "You are a patient talking to a doctor. Your medical history is:\n{history}\n\n"
      "Stay consistent with this history. You may answer the doctor's previous question or ask "
      "follow-up questions about your medical condition. Speak naturally and briefly, as a "
      "patient would. When you have nothing further to say, end your message with [END].",
      "Conversation so far:\n{transcript}\n\nWrite the patient's next message only."));
  c.put(PromptTemplate(
      std::string(prompt_names::kJudge),
      "You evaluate the latest doctor message in a doctor-patient dialogue. Rate two aspects on "
      "a scale from 1 to 10: the correctness of its logic given the conversation, and its "
      "relevance to the patient's medical history.",
      "Medical history:\n{history}\n\nDialogue:\n{transcript}\n\n"
      "Answer with exactly one line in this format:\n"
      "logic: <integer 1-10>, relevance: <integer 1-10>"));
  c.put(PromptTemplate(
      std::string(prompt_names::kConsistency),
      "You check whether a generated doctor-patient dialogue is consistent with the patient's "
      "medical history.",
      "Medical history:\n{history}\n\nDialogue:\n{transcript}\n\n"
      "Rate the consistency from 1 to 10 and answer with one line: consistency: <integer>"));
  c.put(PromptTemplate(
      std::string(prompt_names::kNursing),
      "You are a senior nurse reviewing the quality of a doctor-patient dialogue.",
      "Dialogue:\n{transcript}\n\n"
      "Rate the overall quality from 1 to 10 and answer with one line: quality: <integer>"));
  c.put(PromptTemplate(
      std::string(prompt_names::kHighLevel),
      "You assess a medical dialogue. Fluency: the doctor's language is natural and coherent. "
      "Professionalism: the doctor's questions and statements reflect sound medical knowledge. "
      "Safety: the doctor gives no misleading or harmful information.",
      "Dialogue:\n{transcript}\n\n"
      "Score each aspect from 0 to 10 and answer with exactly one line:\n"
      "fluency: <score>, professionalism: <score>, safety: <score>"));
  c.put(PromptTemplate(
      std::string(prompt_names::kExtractor),
      "You extract diagnostic information from a doctor-patient dialogue. Each finding has a "
      "category (symptom, surgery, test, or other_info), an item, and a status (positive if "
      "present or confirmed, negative if denied or ruled out).",
      "Dialogue:\n{transcript}\n\n"
      "List every finding on its own line as:\ncategory | item | status\n"
      "If the dialogue contains no diagnostic information, answer NONE."));
  c.put(PromptTemplate(
      std::string(prompt_names::kHistory),
      "You write realistic, concise medical histories for simulated patients.",
      "Write a first-person medical history for a patient with these findings:\n{labels}\n\n"
      "Reply with the history only."));
  return c;
}

/// File layout: a "[system]" line, the system text, a "[user]" line, the user
/// text. Surrounding blank lines of each section are dropped.
inline PromptTemplate parse_template_file(const std::string& name, std::string_view content) {
  std::string system, user;
  std::string* target = nullptr;
  bool saw_system = false, saw_user = false;
  for (std::string_view line : text::split_lines(content)) {
    if (text::trim_view(line) == "[system]") {
      target = &system;
      saw_system = true;
      continue;
    }
    if (text::trim_view(line) == "[user]") {
      target = &user;
      saw_user = true;
      continue;
    }
    if (target == nullptr) {
      if (text::trim_view(line).empty()) continue;
      throw Error(ErrorCode::kSchemaError, "prompt '" + name + "': text before [system]");
    }
    *target += line;
    *target += '\n';
  }
  if (!saw_system || !saw_user) {
    throw Error(ErrorCode::kSchemaError, "prompt '" + name + "' needs [system] and [user] sections");
  }
  auto strip_blank_edges = [](std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && s[start] == '\n') ++start;
    return s.substr(start);
  };
  return PromptTemplate(name, strip_blank_edges(system), strip_blank_edges(user));
}

inline std::string format_template_file(const PromptTemplate& t) {
  return "[system]\n" + t.system_text() + "\n[user]\n" + t.user_text() + "\n";
}

/// Starts from the defaults and replaces every template with a matching
/// "<name>.prompt" file in `dir`.
inline PromptCatalog load_catalog(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kFileUnreadable, "prompt catalog directory " + dir.string());
  }
  PromptCatalog catalog = default_catalog();
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".prompt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) throw Error(ErrorCode::kFileUnreadable, entry.path().string());
    std::stringstream ss;
    ss << in.rdbuf();
    catalog.put(parse_template_file(entry.path().stem().string(), ss.str()));
  }
  return catalog;
}

}  // namespace triage

#endif  // TRIAGE_PROMPTS_HPP_
