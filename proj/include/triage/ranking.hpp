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

// Candidate-ranking search over dialogues.
//
// N beams advance in lock-step. Each extension round, every live beam gets a
// patient reply, the doctor drafts N continuations of that beam, the judge
// scores each continuation, and the best one replaces the beam. When every
// beam has ended or the round budget is spent, the judge scores the N
// finished beams and the best one is returned.
//
// Selection is argmax over the judge total; ties go to the lowest candidate
// index and an unparseable judge reply (total -1) loses to every parsed one.

#ifndef TRIAGE_RANKING_HPP_
#define TRIAGE_RANKING_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/agents.hpp"
#include "triage/backend.hpp"
#include "triage/core.hpp"
#include "triage/error.hpp"

namespace triage {

enum class TieBreak { kFirstIndex };

struct SearchConfig {
  static constexpr int kMaxCandidates = 16;

  int n_candidates = 3;
  /// Number of extension rounds after the opening exchange.
  int max_rounds = 4;
  TieBreak tie_break = TieBreak::kFirstIndex;
  bool stop_on_patient_end = true;
};

inline void validate(const SearchConfig& cfg) {
  if (cfg.n_candidates < 1 || cfg.n_candidates > SearchConfig::kMaxCandidates) {
    throw Error(ErrorCode::kInvalidConfig, "n_candidates must be in [1, 16]");
  }
  if (cfg.max_rounds < 1) throw Error(ErrorCode::kInvalidConfig, "max_rounds must be >= 1");
}

/// One backend per agent role; the same instance may serve several roles.
struct BackendSet {
  BackendPtr doctor;
  BackendPtr patient;
  BackendPtr judge;
  BackendPtr extractor;

  static BackendSet shared(const BackendPtr& b) { return BackendSet{b, b, b, b}; }
};

struct ScoredCandidate {
  Dialogue dialogue;
  RankScore score;
  int candidate_index = 0;
};

struct Selection {
  int index = 0;
  /// Every candidate was unparseable; index 0 kept by default.
  bool fallback = false;
};

inline Selection select_best(const std::vector<RankScore>& scores) {
  Selection s;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].total > scores[s.index].total) s.index = static_cast<int>(i);
  }
  s.fallback = !scores.empty() && scores[s.index].is_sentinel();
  return s;
}

// ---------------------------------------------------------------------------
// Trace

struct PatientEvent {
  int round = 0;
  int beam = 0;
  std::string utterance;
  bool ended = false;
};

struct RoundRecord {
  int round = 0;
  int beam = 0;
  std::vector<ScoredCandidate> candidates;
  Selection selection;
};

struct SearchTrace {
  std::vector<std::string> initial_candidates;
  std::vector<PatientEvent> patient_events;
  std::vector<RoundRecord> rounds;
  std::vector<RankScore> final_scores;
  std::optional<Selection> final_selection;
  std::vector<std::string> warnings;
};

/// True when every recorded selection is the argmax of its recorded scores.
inline bool trace_selections_sound(const SearchTrace& trace) {
  auto totals = [](const std::vector<ScoredCandidate>& cs) {
    std::vector<RankScore> s;
    for (const auto& c : cs) s.push_back(c.score);
    return s;
  };
  for (const auto& r : trace.rounds) {
    if (select_best(totals(r.candidates)).index != r.selection.index) return false;
    for (const auto& c : r.candidates) {
      if (c.score.total > r.candidates[r.selection.index].score.total) return false;
    }
  }
  if (trace.final_selection &&
      select_best(trace.final_scores).index != trace.final_selection->index) {
    return false;
  }
  return true;
}

/// Run-log records, one JSON object per line: initial drafts, patient
/// replies, scored candidates and final scores, in the order they happened.
inline std::vector<nlohmann::json> trace_records(const SearchTrace& trace) {
  std::vector<nlohmann::json> out;
  for (std::size_t t = 0; t < trace.initial_candidates.size(); ++t) {
    out.push_back({{"stage", "initial"},
                   {"round", 1},
                   {"beam", t},
                   {"candidate_index", t},
                   {"utterance", trace.initial_candidates[t]},
                   {"selected", true}});
  }
  // Every round record follows the patient reply of the same round and beam.
  std::size_t next_round = 0;
  for (const auto& p : trace.patient_events) {
    out.push_back({{"stage", "patient"}, {"round", p.round}, {"beam", p.beam},
                   {"utterance", p.utterance}, {"ended", p.ended}});
    if (next_round >= trace.rounds.size()) continue;
    const auto& r = trace.rounds[next_round];
    if (r.round != p.round || r.beam != p.beam) continue;
    ++next_round;
    for (const auto& c : r.candidates) {
      out.push_back({{"stage", "extend"},
                     {"round", r.round},
                     {"beam", r.beam},
                     {"candidate_index", c.candidate_index},
                     {"utterance", c.dialogue.last().text},
                     {"logic", c.score.logic},
                     {"relevance", c.score.relevance},
                     {"total", c.score.total},
                     {"selected", c.candidate_index == r.selection.index}});
    }
  }
  for (std::size_t t = 0; t < trace.final_scores.size(); ++t) {
    const auto& s = trace.final_scores[t];
    out.push_back({{"stage", "final"},
                   {"beam", t},
                   {"logic", s.logic},
                   {"relevance", s.relevance},
                   {"total", s.total},
                   {"selected", trace.final_selection &&
                                    static_cast<int>(t) == trace.final_selection->index}});
  }
  return out;
}

struct SearchResult {
  Dialogue best;
  BeamSet beams;
  SearchTrace trace;
};

/// A search that failed part-way. Carries the trace up to the failure.
class SearchFailure : public Error {
 public:
  SearchFailure(const Error& cause, SearchTrace partial)
      : Error(cause.code(), cause.detail()), trace_(std::move(partial)) {}
  const SearchTrace& trace() const { return trace_; }

 private:
  SearchTrace trace_;
};

// ---------------------------------------------------------------------------
// Search steps

class RankingEngine {
 public:
  RankingEngine(BackendSet backends, Agents agents, SearchConfig cfg)
      : backends_(std::move(backends)), agents_(std::move(agents)), cfg_(cfg) {
    validate(cfg_);
    if (!backends_.doctor || !backends_.patient || !backends_.judge) {
      throw Error(ErrorCode::kInvalidConfig, "doctor, patient and judge backends are required");
    }
  }

  const SearchConfig& config() const { return cfg_; }
  const Agents& agents() const { return agents_; }

  BeamSet init_beams(const Dialogue& opening, const MedicalHistory& h,
                     SearchTrace* trace = nullptr) const {
    if (opening.size() != 1) {
      throw Error(ErrorCode::kPrecondition, "opening must hold exactly one patient turn");
    }
    const int n = cfg_.n_candidates;
    auto drafts = agents_.doctor_candidates(*backends_.doctor, opening, h, n);
    BeamSet set;
    set.round = 1;
    for (int t = 0; t < n; ++t) {
      set.beams.push_back(
          with_id(append_turn(opening, Role::kDoctor, drafts[t]), beam_id(opening.id(), t)));
    }
    if (trace) trace->initial_candidates = std::move(drafts);
    return set;
  }

  BeamSet extend_round(const BeamSet& beams, const MedicalHistory& h,
                       SearchTrace* trace = nullptr) const {
    if (beams.round - 1 >= cfg_.max_rounds) {
      throw Error(ErrorCode::kPrecondition, "round budget already spent");
    }
    if (!beams.any_live()) throw Error(ErrorCode::kPrecondition, "every beam has ended");

    BeamSet next;
    next.round = beams.round + 1;
    for (std::size_t t = 0; t < beams.beams.size(); ++t) {
      const Dialogue& beam = beams.beams[t];
      if (beam.terminated()) {
        next.beams.push_back(beam);
        continue;
      }
      const PatientReply reply = agents_.patient_respond(*backends_.patient, beam, h);
      Dialogue grown = reply.text.empty() ? beam : append_turn(beam, Role::kPatient, reply.text);
      if (trace) {
        trace->patient_events.push_back(
            PatientEvent{next.round, static_cast<int>(t), reply.text, reply.wants_to_end});
      }
      if (reply.text.empty() || (reply.wants_to_end && cfg_.stop_on_patient_end)) {
        next.beams.push_back(mark_terminated(grown));
        continue;
      }

      const auto drafts =
          agents_.doctor_candidates(*backends_.doctor, grown, h, cfg_.n_candidates);
      RoundRecord record;
      record.round = next.round;
      record.beam = static_cast<int>(t);
      std::vector<RankScore> scores;
      for (int k = 0; k < cfg_.n_candidates; ++k) {
        Dialogue cont = append_turn(grown, Role::kDoctor, drafts[k]);
        RankScore score = agents_.judge_score(*backends_.judge, cont, h);
        scores.push_back(score);
        record.candidates.push_back(ScoredCandidate{std::move(cont), score, k});
      }
      record.selection = select_best(scores);
      if (record.selection.fallback && trace) {
        trace->warnings.push_back("round " + std::to_string(next.round) + " beam " +
                                  std::to_string(t) + ": no judge reply parsed; kept candidate 0");
      }
      next.beams.push_back(record.candidates[record.selection.index].dialogue);
      if (trace) trace->rounds.push_back(std::move(record));
    }
    return next;
  }

  std::pair<Dialogue, std::vector<RankScore>> finalize(const BeamSet& beams, const MedicalHistory& h,
                                                       SearchTrace* trace = nullptr) const {
    if (beams.beams.empty()) throw Error(ErrorCode::kPrecondition, "no beams to finalize");
    std::vector<RankScore> scores;
    for (const Dialogue& beam : beams.beams) {
      scores.push_back(agents_.judge_score(*backends_.judge, beam, h));
    }
    const Selection sel = select_best(scores);
    if (trace) {
      trace->final_scores = scores;
      trace->final_selection = sel;
      if (sel.fallback && beams.beams.size() > 1) {
        trace->warnings.push_back("final: no judge reply parsed; kept beam 0");
      }
    }
    return {beams.beams[sel.index], std::move(scores)};
  }

  SearchResult run_search(const MedicalHistory& h, std::string_view opening_text,
                          std::string dialogue_id = {}) const {
    SearchTrace trace;
    try {
      const Dialogue opening = new_dialogue(h, opening_text, std::move(dialogue_id));
      BeamSet beams = init_beams(opening, h, &trace);
      while (beams.round - 1 < cfg_.max_rounds && beams.any_live()) {
        beams = extend_round(beams, h, &trace);
      }
      auto [best, scores] = finalize(beams, h, &trace);
      return SearchResult{with_id(best, opening.id()), std::move(beams), std::move(trace)};
    } catch (const SearchFailure&) {
      throw;
    } catch (const Error& e) {
      throw SearchFailure(e, std::move(trace));
    }
  }

  static std::string beam_id(const std::string& base, int t) {
    return base + "#b" + std::to_string(t);
  }

 private:
  BackendSet backends_;
  Agents agents_;
  SearchConfig cfg_;
};

}  // namespace triage

#endif  // TRIAGE_RANKING_HPP_
