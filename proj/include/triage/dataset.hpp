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

// Labeled dialogue corpora: loading with fail-soft validation, the
// train/validation/test split, medical-history attachment, and conversion
// from the MIE release layout. The canonical record layout is described in
// docs/data-format.md.

#ifndef TRIAGE_DATASET_HPP_
#define TRIAGE_DATASET_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/agents.hpp"
#include "triage/backend.hpp"
#include "triage/core.hpp"
#include "triage/error.hpp"
#include "triage/text.hpp"

namespace triage {

struct RawTurn {
  Role role = Role::kPatient;
  std::string text;

  friend bool operator==(const RawTurn&, const RawTurn&) = default;
};

struct CorpusRecord {
  std::string id;
  std::vector<RawTurn> turns;
  std::set<DiagnosticLabel> labels;
  std::optional<MedicalHistory> history;
  std::optional<std::string> split;  // "train" | "validation" | "test"
};

struct LoadIssue {
  std::size_t index = 0;  // 0-based record position in the file
  std::string id;
  std::string message;
};

struct LoadResult {
  std::vector<CorpusRecord> records;
  std::vector<LoadIssue> errors;
};

inline const std::set<std::string>& split_names() {
  static const std::set<std::string> kNames = {"train", "validation", "test"};
  return kNames;
}

/// Throws Error(kSchemaError) with a short reason for the first problem found.
inline CorpusRecord record_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kSchemaError, why); };
  if (!j.is_object()) fail("record is not an object");
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
    fail("missing id");
  }
  CorpusRecord rec;
  rec.id = j["id"].get<std::string>();
  if (!j.contains("turns") || !j["turns"].is_array() || j["turns"].empty()) fail("missing turns");
  for (const auto& t : j["turns"]) {
    if (!t.is_object() || !t.contains("role") || !t.contains("text") || !t["role"].is_string() ||
        !t["text"].is_string()) {
      fail("malformed turn");
    }
    const std::string role = t["role"].get<std::string>();
    if (!text::iequals(role, "patient") && !text::iequals(role, "doctor")) fail("invalid role");
    std::string body = text::trim(t["text"].get<std::string>());
    if (body.empty()) fail("empty turn text");
    rec.turns.push_back(RawTurn{parse_role(role), std::move(body)});
  }
  if (rec.turns.front().role != Role::kPatient) fail("first turn is not the patient");
  for (std::size_t i = 1; i < rec.turns.size(); ++i) {
    if (rec.turns[i].role == rec.turns[i - 1].role) fail("turns do not alternate");
  }
  if (j.contains("labels")) {
    if (!j["labels"].is_array()) fail("labels is not an array");
    for (const auto& l : j["labels"]) {
      if (!l.is_object() || !l.contains("category") || !l.contains("item") || !l.contains("status") ||
          !l["category"].is_string() || !l["item"].is_string() || !l["status"].is_string()) {
        fail("malformed label");
      }
      auto cat = match_category(l["category"].get<std::string>());
      if (!cat) fail("invalid category");
      auto status = match_status(l["status"].get<std::string>());
      if (!status) fail("invalid status");
      if (text::normalize_item(l["item"].get<std::string>()).empty()) fail("empty label item");
      rec.labels.insert(make_label(*cat, l["item"].get<std::string>(), *status));
    }
  }
  if (j.contains("history") && !j["history"].is_null()) {
    if (!j["history"].is_string()) fail("history is not a string");
    const std::string h = j["history"].get<std::string>();
    if (!text::trim_view(h).empty()) {
      auto source = j.value("history_source", std::string("ingested")) == "generated"
                        ? MedicalHistory::Source::kGenerated
                        : MedicalHistory::Source::kIngested;
      rec.history = make_history(rec.id, h, source);
    }
  }
  if (j.contains("split") && !j["split"].is_null()) {
    const std::string s = j["split"].is_string() ? j["split"].get<std::string>() : "";
    if (split_names().count(s) == 0) fail("invalid split");
    rec.split = s;
  }
  return rec;
}

inline nlohmann::json record_to_json(const CorpusRecord& r) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : r.turns) turns.push_back({{"role", role_name(t.role)}, {"text", t.text}});
  nlohmann::json j{{"id", r.id}, {"turns", std::move(turns)}, {"labels", r.labels}};
  if (r.history) {
    j["history"] = r.history->text;
    j["history_source"] = source_name(r.history->source);
  }
  if (r.split) j["split"] = *r.split;
  return j;
}

/// Accepts a JSON array of records or one record per line. Bad records are
/// reported, not fatal, unless more than half of the file is bad.
inline LoadResult load_corpus_text(std::string_view content) {
  std::vector<nlohmann::json> raw;
  std::vector<std::string> parse_errors;
  const std::string_view body = text::trim_view(content);
  LoadResult out;
  std::size_t malformed = 0;
  if (!body.empty() && body.front() == '[') {
    try {
      for (auto& r : nlohmann::json::parse(body)) raw.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, std::string("corpus array: ") + e.what());
    }
  } else {
    std::size_t index = 0;
    for (std::string_view line : text::split_lines(body)) {
      if (text::trim_view(line).empty()) continue;
      try {
        raw.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception&) {
        raw.push_back(nullptr);
        parse_errors.resize(raw.size());
        parse_errors.back() = "unparseable line";
      }
      ++index;
    }
  }
  parse_errors.resize(raw.size());

  std::set<std::string> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string id = raw[i].is_object() && raw[i].contains("id") && raw[i]["id"].is_string()
                         ? raw[i]["id"].get<std::string>()
                         : std::string{};
    if (!parse_errors[i].empty()) {
      out.errors.push_back(LoadIssue{i, id, parse_errors[i]});
      ++malformed;
      continue;
    }
    try {
      CorpusRecord rec = record_from_json(raw[i]);
      if (!seen.insert(rec.id).second) throw Error(ErrorCode::kSchemaError, "duplicate id");
      out.records.push_back(std::move(rec));
    } catch (const Error& e) {
      out.errors.push_back(LoadIssue{i, id, e.detail()});
      ++malformed;
    }
  }
  if (!raw.empty() && malformed * 2 > raw.size()) {
    throw Error(ErrorCode::kSchemaError, std::to_string(malformed) + " of " +
                                             std::to_string(raw.size()) + " records are malformed");
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileUnreadable, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LoadResult load_corpus(const std::filesystem::path& path) {
  return load_corpus_text(read_file(path));
}

/// One compact JSON object per line, records in the given order.
inline std::string serialize_corpus(const std::vector<CorpusRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline Dialogue reference_dialogue(const CorpusRecord& r) {
  MedicalHistory ref{r.id, "-", MedicalHistory::Source::kIngested};
  Dialogue d = new_dialogue(ref, r.turns.front().text, r.id);
  for (std::size_t i = 1; i < r.turns.size(); ++i) d = append_turn(d, r.turns[i].role, r.turns[i].text);
  return d;
}

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  std::size_t train = 800;
  std::size_t validation = 160;
  std::size_t test = 160;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  bool from_tags = false;

  const std::vector<std::string>& get(std::string_view name) const {
    if (name == "train") return train;
    if (name == "validation") return validation;
    if (name == "test") return test;
    throw Error(ErrorCode::kInvalidConfig, "unknown split '" + std::string(name) + "'");
  }
};

/// Official split tags win when every record carries one. Otherwise ids are
/// sorted, shuffled with a seeded Fisher-Yates (raw mt19937_64 draws, so the
/// permutation is identical on every platform) and cut by the counts.
inline Split apply_split(const std::vector<CorpusRecord>& records, const SplitSpec& spec,
                         std::uint64_t seed) {
  Split out;
  const bool tagged = !records.empty() && std::all_of(records.begin(), records.end(),
                                                      [](const CorpusRecord& r) { return r.split.has_value(); });
  if (tagged) {
    out.from_tags = true;
    for (const auto& r : records) {
      if (*r.split == "train") out.train.push_back(r.id);
      else if (*r.split == "validation") out.validation.push_back(r.id);
      else out.test.push_back(r.id);
    }
    for (auto* v : {&out.train, &out.validation, &out.test}) std::sort(v->begin(), v->end());
    return out;
  }
  const std::size_t need = spec.train + spec.validation + spec.test;
  if (need > records.size()) {
    throw Error(ErrorCode::kInsufficientRecords, "split needs " + std::to_string(need) +
                                                     " records, corpus has " +
                                                     std::to_string(records.size()));
  }
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng() % i]);
  }
  auto take = [&](std::size_t from, std::size_t count) {
    return std::vector<std::string>(ids.begin() + from, ids.begin() + from + count);
  };
  out.train = take(0, spec.train);
  out.validation = take(spec.train, spec.validation);
  out.test = take(spec.train + spec.validation, spec.test);
  return out;
}

inline nlohmann::json split_json(const Split& s) {
  return {{"source", s.from_tags ? "tags" : "seeded"},
          {"train", s.train},
          {"validation", s.validation},
          {"test", s.test}};
}

// ---------------------------------------------------------------------------
// Histories

/// Sidecar: one {"id": ..., "history": ...} object per line.
inline std::map<std::string, std::string> load_history_sidecar(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  const std::string content = read_file(path);
  std::size_t line_no = 0;
  for (std::string_view line : text::split_lines(content)) {
    ++line_no;
    if (text::trim_view(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("history").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct HistorySources {
  const std::map<std::string, std::string>* sidecar = nullptr;
  Backend* backend = nullptr;
  const Agents* agents = nullptr;
};

/// Keeps an inline history, else ingests from the sidecar, else synthesizes
/// one from the record's labels through the backend.
inline CorpusRecord attach_history(const CorpusRecord& record, const HistorySources& src) {
  CorpusRecord out = record;
  if (out.history) return out;
  if (src.sidecar) {
    auto it = src.sidecar->find(record.id);
    if (it != src.sidecar->end() && !text::trim_view(it->second).empty()) {
      out.history = make_history(record.id, it->second, MedicalHistory::Source::kIngested);
      return out;
    }
  }
  if (src.backend && src.agents) {
    const ChatResponse r = src.backend->complete(src.agents->history_request(record.labels));
    out.history = make_history(record.id, r.text, MedicalHistory::Source::kGenerated);
    return out;
  }
  throw Error(ErrorCode::kEmptyHistory, "no history available for '" + record.id + "'");
}

// ---------------------------------------------------------------------------
// MIE conversion

namespace detail {

inline bool strip_prefix(std::string& s, std::string_view prefix) {
  if (s.rfind(prefix, 0) != 0) return false;
  s.erase(0, prefix.size());
  return true;
}

inline std::optional<RawTurn> parse_mie_utterance(const std::string& raw) {
  std::string s = text::trim(raw);
  static const std::pair<std::string_view, Role> kPrefixes[] = {
      {"患者：", Role::kPatient}, {"患者:", Role::kPatient}, {"病人：", Role::kPatient},
      {"病人:", Role::kPatient}, {"医生：", Role::kDoctor}, {"医生:", Role::kDoctor},
      {"Patient:", Role::kPatient}, {"Doctor:", Role::kDoctor},
      {"patient:", Role::kPatient}, {"doctor:", Role::kDoctor}};
  for (const auto& [prefix, role] : kPrefixes) {
    if (strip_prefix(s, prefix)) {
      s = text::trim(s);
      if (s.empty()) return std::nullopt;
      return RawTurn{role, s};
    }
  }
  return std::nullopt;
}

inline std::optional<DiagnosticLabel> parse_mie_label(const std::string& raw) {
  // "category:item-status"; full-width colons are normalized first.
  std::string s = raw;
  for (std::size_t pos; (pos = s.find("：")) != std::string::npos;) s.replace(pos, 3, ":");
  const auto colon = s.find(':');
  const auto dash = s.rfind('-');
  if (colon == std::string::npos || dash == std::string::npos || dash < colon) return std::nullopt;
  const std::string cat_raw = text::trim(s.substr(0, colon));
  const std::string item = s.substr(colon + 1, dash - colon - 1);
  const std::string status_raw = text::trim(s.substr(dash + 1));
  static const std::map<std::string, Category> kCats = {
      {"症状", Category::kSymptom}, {"手术", Category::kSurgery}, {"检查", Category::kTest},
      {"一般信息", Category::kOtherInfo}, {"其他信息", Category::kOtherInfo}};
  std::optional<Category> cat;
  if (auto it = kCats.find(cat_raw); it != kCats.end()) cat = it->second;
  else cat = match_category(cat_raw);
  std::optional<Status> status;
  if (status_raw == "阳性") status = Status::kPositive;
  else if (status_raw == "阴性") status = Status::kNegative;
  else status = match_status(status_raw);
  if (!cat || !status || text::normalize_item(item).empty()) return std::nullopt;
  return make_label(*cat, item, *status);
}

}  // namespace detail

struct ConvertResult {
  std::vector<CorpusRecord> records;
  std::size_t skipped_dialogues = 0;
  std::size_t skipped_labels = 0;
};

/// MIE layout: an array of dialogues, each either an array of windows or an
/// object {"id"?, "dialogue": [windows]}. A window is {"utterances":
/// ["患者：...", "医生：..."], "label": ["症状:心悸-阳性", ...]}. Overlapping
/// windows are stitched by their longest suffix/prefix overlap, same-speaker
/// runs are merged, and leading doctor turns are dropped.
inline ConvertResult convert_mie(const nlohmann::json& root, const std::string& id_prefix,
                                 std::optional<std::string> split_tag) {
  if (!root.is_array()) throw Error(ErrorCode::kSchemaError, "MIE input must be a JSON array");
  if (split_tag && split_names().count(*split_tag) == 0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid split tag '" + *split_tag + "'");
  }
  ConvertResult out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& entry = root[i];
    const nlohmann::json* windows = &entry;
    std::string id = id_prefix + std::to_string(i);
    if (entry.is_object()) {
      if (entry.contains("id")) {
        id = id_prefix + (entry["id"].is_string() ? entry["id"].get<std::string>() : entry["id"].dump());
      } else if (entry.contains("pid")) {
        id = id_prefix + (entry["pid"].is_string() ? entry["pid"].get<std::string>() : entry["pid"].dump());
      }
      windows = entry.contains("dialogue") ? &entry["dialogue"] : nullptr;
    }
    if (windows == nullptr || !windows->is_array()) {
      ++out.skipped_dialogues;
      continue;
    }

    std::vector<std::string> utterances;
    CorpusRecord rec;
    rec.id = id;
    rec.split = split_tag;
    for (const auto& w : *windows) {
      if (!w.is_object()) continue;
      std::vector<std::string> win;
      if (w.contains("utterances") && w["utterances"].is_array()) {
        for (const auto& u : w["utterances"]) {
          if (u.is_string()) win.push_back(u.get<std::string>());
        }
      }
      std::size_t overlap = std::min(win.size(), utterances.size());
      while (overlap > 0 &&
             !std::equal(win.begin(), win.begin() + overlap, utterances.end() - overlap)) {
        --overlap;
      }
      utterances.insert(utterances.end(), win.begin() + overlap, win.end());
      if (w.contains("label") && w["label"].is_array()) {
        for (const auto& l : w["label"]) {
          if (!l.is_string()) continue;
          if (auto lab = detail::parse_mie_label(l.get<std::string>())) rec.labels.insert(*lab);
          else ++out.skipped_labels;
        }
      }
    }
    for (const auto& u : utterances) {
      auto turn = detail::parse_mie_utterance(u);
      if (!turn) continue;
      if (rec.turns.empty() && turn->role == Role::kDoctor) continue;
      if (!rec.turns.empty() && rec.turns.back().role == turn->role) {
        rec.turns.back().text += " " + turn->text;
      } else {
        rec.turns.push_back(std::move(*turn));
      }
    }
    if (rec.turns.empty()) {
      ++out.skipped_dialogues;
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace triage

#endif  // TRIAGE_DATASET_HPP_
