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

// Domain values shared by every module: dialogues, histories, judge scores and
// diagnostic labels. All of them are immutable once built; "mutation" returns
// a new value.

#ifndef TRIAGE_CORE_HPP_
#define TRIAGE_CORE_HPP_

#include <algorithm>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"
#include "triage/text.hpp"

namespace triage {

enum class Role { kPatient, kDoctor };

inline std::string_view role_name(Role r) {
  return r == Role::kPatient ? "patient" : "doctor";
}

inline Role parse_role(std::string_view s) {
  if (text::iequals(s, "patient")) return Role::kPatient;
  if (text::iequals(s, "doctor")) return Role::kDoctor;
  throw Error(ErrorCode::kSchemaError, "unknown role '" + std::string(s) + "'");
}

inline Role other(Role r) {
  return r == Role::kPatient ? Role::kDoctor : Role::kPatient;
}

struct Turn {
  Role role = Role::kPatient;
  std::string text;
  int round_index = 1;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct MedicalHistory {
  enum class Source { kIngested, kGenerated };

  std::string patient_id;
  std::string text;
  Source source = Source::kIngested;

  friend bool operator==(const MedicalHistory&, const MedicalHistory&) = default;
};

inline MedicalHistory make_history(std::string patient_id, std::string_view text,
                                   MedicalHistory::Source source =
                                       MedicalHistory::Source::kIngested) {
  std::string body = text::trim(text);
  if (body.empty()) {
    throw Error(ErrorCode::kEmptyHistory, "history for '" + patient_id + "' is empty");
  }
  return MedicalHistory{std::move(patient_id), std::move(body), source};
}

inline std::string_view source_name(MedicalHistory::Source s) {
  return s == MedicalHistory::Source::kIngested ? "ingested" : "generated";
}

/// A patient/doctor exchange. Always starts with the patient, roles strictly
/// alternate, and a doctor turn shares the round index of the patient turn
/// before it.
class Dialogue {
 public:
  const std::string& id() const { return id_; }
  const std::string& history_ref() const { return history_ref_; }
  const std::vector<Turn>& turns() const { return turns_; }
  bool terminated() const { return terminated_; }
  const Turn& last() const { return turns_.back(); }
  std::size_t size() const { return turns_.size(); }
  int rounds() const { return turns_.back().round_index; }

  friend bool operator==(const Dialogue&, const Dialogue&) = default;

 private:
  Dialogue() = default;

  std::string id_;
  std::string history_ref_;
  std::vector<Turn> turns_;
  bool terminated_ = false;

  friend Dialogue new_dialogue(const MedicalHistory&, std::string_view, std::string);
  friend Dialogue append_turn(const Dialogue&, Role, std::string_view);
  friend Dialogue mark_terminated(const Dialogue&);
  friend Dialogue with_id(const Dialogue&, std::string);
};

inline Dialogue new_dialogue(const MedicalHistory& history, std::string_view opening,
                             std::string id = {}) {
  std::string body = text::trim(opening);
  if (body.empty()) throw Error(ErrorCode::kEmptyUtterance, "opening patient turn");
  Dialogue d;
  d.id_ = id.empty() ? history.patient_id : std::move(id);
  d.history_ref_ = history.patient_id;
  d.turns_.push_back(Turn{Role::kPatient, std::move(body), 1});
  return d;
}

inline Dialogue append_turn(const Dialogue& d, Role role, std::string_view text_in) {
  if (d.terminated_) throw Error(ErrorCode::kDialogueTerminated, d.id_);
  if (role == d.last().role) {
    throw Error(ErrorCode::kAlternationViolation,
                std::string(role_name(role)) + " cannot follow " +
                    std::string(role_name(d.last().role)));
  }
  std::string body = text::trim(text_in);
  if (body.empty()) throw Error(ErrorCode::kEmptyUtterance, std::string(role_name(role)));
  Dialogue next = d;
  const int round = role == Role::kPatient ? d.rounds() + 1 : d.rounds();
  next.turns_.push_back(Turn{role, std::move(body), round});
  return next;
}

inline Dialogue mark_terminated(const Dialogue& d) {
  Dialogue next = d;
  next.terminated_ = true;
  return next;
}

inline Dialogue with_id(const Dialogue& d, std::string id) {
  Dialogue next = d;
  next.id_ = std::move(id);
  return next;
}

inline std::vector<std::string> utterances_of(const Dialogue& d, Role role) {
  std::vector<std::string> out;
  for (const Turn& t : d.turns()) {
    if (t.role == role) out.push_back(t.text);
  }
  return out;
}

struct SpeakerLabels {
  std::string patient = "Patient";
  std::string doctor = "Doctor";
};

/// One "<label>: <text>" line per turn, newline-joined, no trailing newline.
inline std::string render_transcript(const Dialogue& d, const SpeakerLabels& labels = {}) {
  std::string out;
  for (std::size_t i = 0; i < d.turns().size(); ++i) {
    const Turn& t = d.turns()[i];
    if (i > 0) out.push_back('\n');
    out += t.role == Role::kPatient ? labels.patient : labels.doctor;
    out += ": ";
    out += text::flatten_newlines(t.text);
  }
  return out;
}

/// Judge verdict for one candidate. A reply that never parsed is represented
/// by the sentinel total -1, which orders below every real score.
struct RankScore {
  static constexpr int kMaxAspect = 10;
  static constexpr int kSentinel = -1;

  int logic = 0;
  int relevance = 0;
  int total = 0;

  static RankScore from_aspects(long logic, long relevance) {
    auto clamp = [](long v) { return static_cast<int>(std::clamp<long>(v, 0, kMaxAspect)); };
    RankScore s;
    s.logic = clamp(logic);
    s.relevance = clamp(relevance);
    s.total = s.logic + s.relevance;
    return s;
  }
  static RankScore unparseable() { return RankScore{0, 0, kSentinel}; }

  bool is_sentinel() const { return total == kSentinel; }

  friend bool operator==(const RankScore&, const RankScore&) = default;
};

enum class Category { kSymptom, kSurgery, kTest, kOtherInfo };
enum class Status { kPositive, kNegative };

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::kSymptom: return "symptom";
    case Category::kSurgery: return "surgery";
    case Category::kTest: return "test";
    case Category::kOtherInfo: return "other_info";
  }
  return "other_info";
}

inline std::string_view status_name(Status s) {
  return s == Status::kPositive ? "positive" : "negative";
}

/// Case-insensitive exact match against the accepted spellings of each
/// category. Anything else is rejected.
inline std::optional<Category> match_category(std::string_view raw) {
  const std::string s = text::normalize_item(raw);
  static const std::pair<std::string_view, Category> kAliases[] = {
      {"symptom", Category::kSymptom},       {"symptoms", Category::kSymptom},
      {"surgery", Category::kSurgery},       {"surgeries", Category::kSurgery},
      {"test", Category::kTest},             {"tests", Category::kTest},
      {"other_info", Category::kOtherInfo},  {"other info", Category::kOtherInfo},
      {"other information", Category::kOtherInfo},
      {"other", Category::kOtherInfo},
  };
  for (const auto& [name, cat] : kAliases) {
    if (s == name) return cat;
  }
  return std::nullopt;
}

inline std::optional<Status> match_status(std::string_view raw) {
  const std::string s = text::normalize_item(raw);
  if (s == "positive" || s == "pos") return Status::kPositive;
  if (s == "negative" || s == "neg") return Status::kNegative;
  return std::nullopt;
}

struct DiagnosticLabel {
  Category category = Category::kSymptom;
  std::string item;
  Status status = Status::kPositive;

  friend auto operator<=>(const DiagnosticLabel&, const DiagnosticLabel&) = default;
  friend bool operator==(const DiagnosticLabel&, const DiagnosticLabel&) = default;
};

inline DiagnosticLabel make_label(Category category, std::string_view item, Status status) {
  std::string norm = text::normalize_item(item);
  if (norm.empty()) throw Error(ErrorCode::kSchemaError, "empty label item");
  return DiagnosticLabel{category, std::move(norm), status};
}

/// N parallel dialogues advanced in lock-step by the ranking search.
struct BeamSet {
  std::vector<Dialogue> beams;
  int round = 1;

  bool any_live() const {
    return std::any_of(beams.begin(), beams.end(),
                       [](const Dialogue& d) { return !d.terminated(); });
  }
};

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const Turn& t) {
  j = nlohmann::json{{"role", role_name(t.role)}, {"round", t.round_index}, {"text", t.text}};
}

inline void to_json(nlohmann::json& j, const Dialogue& d) {
  j = nlohmann::json{{"id", d.id()},
                     {"history_ref", d.history_ref()},
                     {"terminated", d.terminated()},
                     {"turns", d.turns()}};
}

/// Rebuilds a dialogue by replaying its turns, so every invariant is checked
/// again on the way in. Stored round numbers must agree with the replay.
inline Dialogue dialogue_from_json(const nlohmann::json& j) {
  try {
    const auto& turns = j.at("turns");
    if (!turns.is_array() || turns.empty()) {
      throw Error(ErrorCode::kSchemaError, "dialogue has no turns");
    }
    MedicalHistory ref{j.value("history_ref", std::string{}), "-", MedicalHistory::Source::kIngested};
    if (parse_role(turns[0].at("role").get<std::string>()) != Role::kPatient) {
      throw Error(ErrorCode::kAlternationViolation, "first turn must be the patient");
    }
    Dialogue d = new_dialogue(ref, turns[0].at("text").get<std::string>(),
                              j.at("id").get<std::string>());
    for (std::size_t i = 1; i < turns.size(); ++i) {
      d = append_turn(d, parse_role(turns[i].at("role").get<std::string>()),
                      turns[i].at("text").get<std::string>());
    }
    for (std::size_t i = 0; i < turns.size(); ++i) {
      if (turns[i].contains("round") && turns[i]["round"].get<int>() != d.turns()[i].round_index) {
        throw Error(ErrorCode::kSchemaError, "round index mismatch at turn " + std::to_string(i));
      }
    }
    if (j.value("terminated", false)) d = mark_terminated(d);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
}

inline void to_json(nlohmann::json& j, const DiagnosticLabel& l) {
  j = nlohmann::json{{"category", category_name(l.category)},
                     {"item", l.item},
                     {"status", status_name(l.status)}};
}

inline DiagnosticLabel label_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("category") || !j.contains("item") || !j.contains("status")) {
    throw Error(ErrorCode::kSchemaError, "label needs category, item and status");
  }
  auto cat = match_category(j["category"].get<std::string>());
  if (!cat) throw Error(ErrorCode::kSchemaError, "invalid category");
  auto status = match_status(j["status"].get<std::string>());
  if (!status) throw Error(ErrorCode::kSchemaError, "invalid status");
  return make_label(*cat, j["item"].get<std::string>(), *status);
}

inline void to_json(nlohmann::json& j, const RankScore& s) {
  j = nlohmann::json{{"logic", s.logic}, {"relevance", s.relevance}, {"total", s.total}};
}

}  // namespace triage

#endif  // TRIAGE_CORE_HPP_
