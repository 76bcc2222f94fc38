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

// Live interview sessions: a human plays the patient, the doctor side runs one
// round of candidate generation and judge ranking per patient message.
//
// State machine (per session):
//   AWAITING_PATIENT --patient msg--> AWAITING_DOCTOR --reply--> AWAITING_PATIENT
//   AWAITING_PATIENT --finish--> FINISHED
// A failed backend call rolls the session back to AWAITING_PATIENT.

#ifndef TRIAGE_SESSION_HPP_
#define TRIAGE_SESSION_HPP_

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/agents.hpp"
#include "triage/core.hpp"
#include "triage/error.hpp"
#include "triage/ranking.hpp"

namespace triage {

enum class SessionState { kAwaitingPatient, kAwaitingDoctor, kFinished };

inline std::string_view session_state_name(SessionState s) {
  switch (s) {
    case SessionState::kAwaitingPatient: return "AWAITING_PATIENT";
    case SessionState::kAwaitingDoctor: return "AWAITING_DOCTOR";
    case SessionState::kFinished: return "FINISHED";
  }
  return "FINISHED";
}

struct CandidateView {
  std::string utterance;
  RankScore score;
  bool selected = false;
};

struct FinishOutcome {
  std::set<DiagnosticLabel> labels;
  std::optional<HighLevelScores> highlevel;
  int dropped_lines = 0;
};

struct Session {
  std::string id;
  MedicalHistory history;
  std::optional<Dialogue> dialogue;
  SessionState state = SessionState::kAwaitingPatient;
  std::string created_at;
  std::vector<std::vector<CandidateView>> panels;
  std::optional<FinishOutcome> outcome;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class SessionService {
 public:
  using Clock = std::function<std::string()>;

  struct Options {
    int n_candidates = 3;
    std::optional<std::filesystem::path> log_path;
    Clock clock = utc_timestamp;
  };

  SessionService(BackendSet backends, Agents agents, Options opts)
      : backends_(std::move(backends)), agents_(std::move(agents)), opts_(std::move(opts)) {
    if (opts_.n_candidates < 1 || opts_.n_candidates > SearchConfig::kMaxCandidates) {
      throw Error(ErrorCode::kInvalidConfig, "n_candidates must be in [1, 16]");
    }
    if (opts_.log_path && std::filesystem::exists(*opts_.log_path)) replay(*opts_.log_path);
  }

  /// Routes one request. Never throws; failures map to status codes.
  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body) {
    std::vector<std::string> parts;
    for (std::size_t start = 0; start < path.size();) {
      std::size_t slash = path.find('/', start);
      if (slash == std::string_view::npos) slash = path.size();
      if (slash > start) parts.emplace_back(path.substr(start, slash - start));
      start = slash + 1;
    }
    if (parts.empty() || parts[0] != "sessions") return error(404, "no such route");
    try {
      if (parts.size() == 1 && method == "POST") return create(body);
      if (parts.size() == 2 && method == "GET") return get(parts[1]);
      if (parts.size() == 3 && method == "POST" && parts[2] == "patient") return patient(parts[1], body);
      if (parts.size() == 3 && method == "POST" && parts[2] == "finish") return finish(parts[1]);
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
    return error(404, "no such route");
  }

  std::size_t session_count() const {
    std::lock_guard<std::mutex> lock(map_mu_);
    return sessions_.size();
  }

  std::optional<Session> snapshot(const std::string& id) const {
    auto slot = find(id);
    if (!slot) return std::nullopt;
    std::lock_guard<std::mutex> lock(slot->mu);
    return slot->session;
  }

 private:
  struct Slot {
    std::mutex mu;
    Session session;
    bool busy = false;
  };

  static ApiResponse error(int status, const std::string& message,
                           std::optional<SessionState> state = std::nullopt) {
    nlohmann::json body{{"error", message}};
    if (state) body["state"] = session_state_name(*state);
    return ApiResponse{status, std::move(body)};
  }

  static std::optional<nlohmann::json> parse_body(std::string_view body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
  }

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard<std::mutex> lock(map_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string next_id() {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%06llu", static_cast<unsigned long long>(++counter_));
    return buf;
  }

  ApiResponse create(std::string_view body) {
    auto j = parse_body(body);
    if (!j || !j->contains("history_text") || !(*j)["history_text"].is_string()) {
      return error(400, "body must be {\"history_text\": string}");
    }
    const std::string history_text = (*j)["history_text"].get<std::string>();
    if (text::trim_view(history_text).empty()) return error(400, "history_text is empty");

    auto slot = std::make_shared<Slot>();
    {
      std::lock_guard<std::mutex> lock(map_mu_);
      slot->session.id = next_id();
      slot->session.history = make_history(slot->session.id, history_text);
      slot->session.created_at = opts_.clock();
      sessions_[slot->session.id] = slot;
      log_event({{"event", "create"},
                 {"id", slot->session.id},
                 {"history", slot->session.history.text},
                 {"created_at", slot->session.created_at}});
    }
    return ApiResponse{201, {{"session_id", slot->session.id},
                             {"state", session_state_name(slot->session.state)}}};
  }

  ApiResponse get(const std::string& id) const {
    auto slot = find(id);
    if (!slot) return error(404, "unknown session " + id);
    std::lock_guard<std::mutex> lock(slot->mu);
    return ApiResponse{200, session_json(slot->session)};
  }

  ApiResponse patient(const std::string& id, std::string_view body) {
    auto slot = find(id);
    if (!slot) return error(404, "unknown session " + id);
    auto j = parse_body(body);
    std::string text_in;
    if (j && j->contains("text") && (*j)["text"].is_string()) text_in = (*j)["text"].get<std::string>();

    std::optional<Dialogue> asked;
    MedicalHistory history;
    {
      std::lock_guard<std::mutex> lock(slot->mu);
      Session& s = slot->session;
      if (s.state != SessionState::kAwaitingPatient || slot->busy) {
        return error(409, "session is " + std::string(session_state_name(s.state)), s.state);
      }
      if (text::trim_view(text_in).empty()) return error(400, "body must be {\"text\": non-empty string}", s.state);
      asked = s.dialogue ? append_turn(*s.dialogue, Role::kPatient, text_in)
                         : new_dialogue(s.history, text_in, s.id);
      history = s.history;
      s.state = SessionState::kAwaitingDoctor;
      slot->busy = true;
    }

    std::vector<CandidateView> panel;
    std::optional<Dialogue> answered;
    try {
      const auto drafts = agents_.doctor_candidates(*backends_.doctor, *asked, history, opts_.n_candidates);
      std::vector<RankScore> scores;
      for (const auto& draft : drafts) {
        scores.push_back(agents_.judge_score(*backends_.judge, append_turn(*asked, Role::kDoctor, draft), history));
      }
      const Selection sel = select_best(scores);
      for (std::size_t k = 0; k < drafts.size(); ++k) {
        panel.push_back(CandidateView{drafts[k], scores[k], static_cast<int>(k) == sel.index});
      }
      answered = append_turn(*asked, Role::kDoctor, drafts[sel.index]);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(slot->mu);
      slot->session.state = SessionState::kAwaitingPatient;
      slot->busy = false;
      return error(502, e.what(), slot->session.state);
    }

    std::lock_guard<std::mutex> lock(slot->mu);
    Session& s = slot->session;
    s.dialogue = *answered;
    s.panels.push_back(panel);
    s.state = SessionState::kAwaitingPatient;
    slot->busy = false;
    log_event({{"event", "exchange"},
               {"id", s.id},
               {"patient", answered->turns()[answered->size() - 2].text},
               {"doctor", answered->last().text},
               {"candidates", panel_json(panel)}});
    return ApiResponse{200, {{"doctor_reply", answered->last().text},
                             {"round", answered->rounds()},
                             {"state", session_state_name(s.state)},
                             {"candidates", panel_json(panel)}}};
  }

  ApiResponse finish(const std::string& id) {
    auto slot = find(id);
    if (!slot) return error(404, "unknown session " + id);
    std::optional<Dialogue> dialogue;
    {
      std::lock_guard<std::mutex> lock(slot->mu);
      Session& s = slot->session;
      if (s.state != SessionState::kAwaitingPatient || slot->busy) {
        return error(409, "session is " + std::string(session_state_name(s.state)), s.state);
      }
      dialogue = s.dialogue;
      slot->busy = true;
    }

    FinishOutcome outcome;
    if (dialogue) {
      try {
        const ExtractionResult ex = agents_.extract_diagnostics(*backends_.extractor, *dialogue);
        outcome.labels = ex.labels;
        outcome.dropped_lines = ex.dropped_lines;
        outcome.highlevel = agents_.highlevel_scores(*backends_.judge, *dialogue);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(slot->mu);
        slot->busy = false;
        return error(502, e.what(), slot->session.state);
      }
    }

    std::lock_guard<std::mutex> lock(slot->mu);
    Session& s = slot->session;
    if (s.dialogue) s.dialogue = mark_terminated(*s.dialogue);
    s.state = SessionState::kFinished;
    s.outcome = outcome;
    slot->busy = false;
    nlohmann::json body = outcome_json(outcome);
    log_event({{"event", "finish"}, {"id", s.id}, {"outcome", body}});
    body["state"] = session_state_name(s.state);
    return ApiResponse{200, std::move(body)};
  }

  static nlohmann::json panel_json(const std::vector<CandidateView>& panel) {
    auto arr = nlohmann::json::array();
    for (std::size_t k = 0; k < panel.size(); ++k) {
      arr.push_back({{"index", k},
                     {"utterance", panel[k].utterance},
                     {"logic", panel[k].score.logic},
                     {"relevance", panel[k].score.relevance},
                     {"total", panel[k].score.total},
                     {"selected", panel[k].selected}});
    }
    return arr;
  }

  static nlohmann::json outcome_json(const FinishOutcome& o) {
    nlohmann::json hl = nullptr;
    if (o.highlevel) {
      hl = {{"fluency", o.highlevel->fluency},
            {"professionalism", o.highlevel->professionalism},
            {"safety", o.highlevel->safety}};
    }
    return {{"labels", o.labels}, {"highlevel", hl}, {"dropped_lines", o.dropped_lines}};
  }

 public:
  static nlohmann::json session_json(const Session& s) {
    auto transcript = nlohmann::json::array();
    if (s.dialogue) {
      for (const auto& t : s.dialogue->turns()) {
        transcript.push_back({{"role", role_name(t.role)}, {"text", t.text}, {"round", t.round_index}});
      }
    }
    auto panels = nlohmann::json::array();
    for (const auto& p : s.panels) panels.push_back(panel_json(p));
    nlohmann::json out{{"session_id", s.id},
                       {"state", session_state_name(s.state)},
                       {"history", s.history.text},
                       {"created_at", s.created_at},
                       {"transcript", std::move(transcript)},
                       {"candidate_panels", std::move(panels)},
                       {"diagnostics", nullptr},
                       {"highlevel", nullptr}};
    if (s.outcome) {
      const auto o = outcome_json(*s.outcome);
      out["diagnostics"] = o["labels"];
      out["highlevel"] = o["highlevel"];
    }
    return out;
  }

 private:
  void log_event(const nlohmann::json& event) {
    if (!opts_.log_path) return;
    std::lock_guard<std::mutex> lock(log_mu_);
    std::ofstream out(*opts_.log_path, std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    out.flush();
  }

  /// Rebuilds sessions from the append-only log. Unknown or inconsistent
  /// events are skipped.
  void replay(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      auto ev = nlohmann::json::parse(line, nullptr, false);
      if (ev.is_discarded() || !ev.is_object() || !ev.contains("id")) continue;
      const std::string id = ev["id"].get<std::string>();
      const std::string kind = ev.value("event", "");
      try {
        if (kind == "create") {
          auto slot = std::make_shared<Slot>();
          slot->session.id = id;
          slot->session.history = make_history(id, ev.at("history").get<std::string>());
          slot->session.created_at = ev.value("created_at", "");
          sessions_[id] = slot;
          if (id.size() > 1 && id[0] == 's') {
            counter_ = std::max<unsigned long long>(counter_, std::stoull(id.substr(1)));
          }
          continue;
        }
        auto it = sessions_.find(id);
        if (it == sessions_.end()) continue;
        Session& s = it->second->session;
        if (kind == "exchange" && s.state == SessionState::kAwaitingPatient) {
          Dialogue d = s.dialogue ? append_turn(*s.dialogue, Role::kPatient, ev.at("patient").get<std::string>())
                                  : new_dialogue(s.history, ev.at("patient").get<std::string>(), id);
          s.dialogue = append_turn(d, Role::kDoctor, ev.at("doctor").get<std::string>());
          std::vector<CandidateView> panel;
          for (const auto& c : ev.at("candidates")) {
            panel.push_back(CandidateView{c.at("utterance").get<std::string>(),
                                          RankScore{c.at("logic").get<int>(), c.at("relevance").get<int>(),
                                                    c.at("total").get<int>()},
                                          c.at("selected").get<bool>()});
          }
          s.panels.push_back(std::move(panel));
        } else if (kind == "finish" && s.state == SessionState::kAwaitingPatient) {
          FinishOutcome o;
          const auto& oj = ev.at("outcome");
          for (const auto& l : oj.at("labels")) o.labels.insert(label_from_json(l));
          if (!oj.at("highlevel").is_null()) {
            o.highlevel = HighLevelScores{oj["highlevel"].at("fluency").get<double>(),
                                          oj["highlevel"].at("professionalism").get<double>(),
                                          oj["highlevel"].at("safety").get<double>()};
          }
          o.dropped_lines = oj.value("dropped_lines", 0);
          if (s.dialogue) s.dialogue = mark_terminated(*s.dialogue);
          s.outcome = std::move(o);
          s.state = SessionState::kFinished;
        }
      } catch (const std::exception&) {
        continue;
      }
    }
  }

  BackendSet backends_;
  Agents agents_;
  Options opts_;
  mutable std::mutex map_mu_;
  std::mutex log_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  unsigned long long counter_ = 0;
};

}  // namespace triage

#endif  // TRIAGE_SESSION_HPP_
