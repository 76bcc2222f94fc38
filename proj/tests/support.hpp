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

// Test doubles shared by the unit and acceptance suites.
//
// A "universe" answers every agent request from a table keyed by the path of
// candidate choices that produced the dialogue so far. Doctor drafts are
// named "Q<path>", patient answers "A<path>", so any request can be decoded
// from the last transcript line alone.

#ifndef TRIAGE_TESTS_SUPPORT_HPP_
#define TRIAGE_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "triage/triage.hpp"

namespace triage::testing {

class FnBackend : public Backend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit FnBackend(Fn fn, std::string id = "fn") : fn_(std::move(fn)), id_(std::move(id)) {}
  ChatResponse complete(const ChatRequest& req) override {
    ++calls_;
    return ChatResponse{fn_(req), std::nullopt, id_};
  }
  std::string id() const override { return id_; }
  int calls() const { return calls_; }

 private:
  Fn fn_;
  std::string id_;
  std::atomic<int> calls_{0};
};

/// Last "Patient: ..." or "Doctor: ..." line of a rendered prompt.
inline std::string last_line_of(const std::string& prompt, const std::string& label) {
  std::string found;
  for (std::string_view line : text::split_lines(prompt)) {
    if (line.rfind(label + ": ", 0) == 0) found = std::string(line.substr(label.size() + 2));
  }
  return found;
}

inline std::string last_transcript_line(const std::string& prompt) {
  std::string found;
  for (std::string_view line : text::split_lines(prompt)) {
    if (line.rfind("Patient: ", 0) == 0 || line.rfind("Doctor: ", 0) == 0) found = std::string(line);
  }
  return found;
}

struct AspectPair {
  int logic = 0;
  int relevance = 0;
  bool parseable = true;
};

struct Universe {
  int n = 1;
  int rounds = 1;
  std::map<std::string, AspectPair> scores;  // by doctor path
  std::set<std::string> ends;                // patient ends after this doctor path
  bool clinical_mode = false;                // extractor / high-level replies

  std::string doctor_reply(const ChatRequest& req) const {
    static const std::regex kDraft(R"(draft (\d+) of (\d+))");
    std::smatch m;
    const std::string& u = req.user_prompt;
    std::regex_search(u, m, kDraft);
    const int draft = std::stoi(m[1].str());
    const std::string last_patient = last_line_of(u, "Patient");
    const std::string prefix = last_patient.rfind('A', 0) == 0 ? last_patient.substr(1) + "." : "";
    return "Q" + prefix + std::to_string(draft - 1);
  }

  std::string patient_reply(const ChatRequest& req) const {
    const std::string path = last_line_of(req.user_prompt, "Doctor").substr(1);
    if (ends.count(path)) return "Thank you, doctor. [END]";
    return "A" + path;
  }

  std::string judge_reply(const ChatRequest& req) const {
    if (req.user_prompt.find("fluency:") != std::string::npos) {
      return "fluency: 7.5, professionalism: 8, safety: 9";
    }
    const std::string path = last_line_of(req.user_prompt, "Doctor").substr(1);
    auto it = scores.find(path);
    const AspectPair p = it == scores.end() ? AspectPair{5, 5, true} : it->second;
    if (!p.parseable) return "I cannot rate this one.";
    return "logic: " + std::to_string(p.logic) + ", relevance: " + std::to_string(p.relevance);
  }

  std::string extractor_reply(const ChatRequest&) const {
    return "symptom | palpitations | positive\ntest | ecg | negative";
  }

  BackendSet backends() const {
    auto self = std::make_shared<Universe>(*this);
    return BackendSet{
        std::make_shared<FnBackend>([self](const ChatRequest& r) { return self->doctor_reply(r); }, "doctor"),
        std::make_shared<FnBackend>([self](const ChatRequest& r) { return self->patient_reply(r); }, "patient"),
        std::make_shared<FnBackend>([self](const ChatRequest& r) { return self->judge_reply(r); }, "judge"),
        std::make_shared<FnBackend>([self](const ChatRequest& r) { return self->extractor_reply(r); },
                                    "extractor")};
  }
};

/// Every doctor path of depth 1..rounds+1 receives random aspect scores in
/// [-3, 13]; about one in eight is unparseable. `end_rate` in [0,1] marks
/// paths after which the patient ends.
inline Universe random_universe(std::mt19937_64& rng, int n, int rounds, double end_rate) {
  Universe u;
  u.n = n;
  u.rounds = rounds;
  std::uniform_int_distribution<int> aspect(-3, 13);
  std::uniform_int_distribution<int> eighth(0, 7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> frontier;
  for (int k = 0; k < n; ++k) frontier.push_back(std::to_string(k));
  for (int depth = 0; depth <= rounds; ++depth) {
    std::vector<std::string> next;
    for (const auto& p : frontier) {
      u.scores[p] = AspectPair{aspect(rng), aspect(rng), eighth(rng) != 0};
      if (unit(rng) < end_rate) u.ends.insert(p);
      for (int k = 0; k < n; ++k) next.push_back(p + "." + std::to_string(k));
    }
    frontier = std::move(next);
  }
  return u;
}

inline SearchConfig search_config(int n, int rounds) {
  SearchConfig c;
  c.n_candidates = n;
  c.max_rounds = rounds;
  return c;
}

inline MedicalHistory sample_history(const std::string& id = "h1") {
  return make_history(id, "Hypertension for eight years; occasional palpitations.");
}

inline int oracle_total(const Universe& u, const std::string& path) {
  auto it = u.scores.find(path);
  const AspectPair p = it == u.scores.end() ? AspectPair{5, 5, true} : it->second;
  if (!p.parseable) return -1;
  return std::clamp(p.logic, 0, 10) + std::clamp(p.relevance, 0, 10);
}

/// Brute-force reference for the search: for each beam, walk every index
/// sequence in [0,N)^rounds and keep the first one whose every choice is the
/// lowest-index maximum among its siblings. The final pick is the
/// lowest-index maximum over the beams' last doctor turns. Returns the turn
/// texts of the winning dialogue.
inline std::vector<std::string> oracle_best(const Universe& u, const std::string& opening) {
  struct Walk {
    std::vector<std::string> turns;
    std::string path;
  };
  std::vector<Walk> finals;
  std::size_t total_sequences = 1;
  for (int r = 0; r < u.rounds; ++r) total_sequences *= static_cast<std::size_t>(u.n);

  for (int t = 0; t < u.n; ++t) {
    std::optional<Walk> chosen;
    for (std::size_t code = 0; code < total_sequences && !chosen; ++code) {
      std::vector<int> seq;
      for (std::size_t c = code, r = 0; r < static_cast<std::size_t>(u.rounds); ++r, c /= u.n) {
        seq.push_back(static_cast<int>(c % u.n));
      }
      Walk w{{opening, "Q" + std::to_string(t)}, std::to_string(t)};
      bool consistent = true;
      for (int r = 0; r < u.rounds && consistent; ++r) {
        if (u.ends.count(w.path)) {
          w.turns.push_back("Thank you, doctor.");
          break;
        }
        w.turns.push_back("A" + w.path);
        int best = 0;
        for (int k = 1; k < u.n; ++k) {
          if (oracle_total(u, w.path + "." + std::to_string(k)) >
              oracle_total(u, w.path + "." + std::to_string(best))) {
            best = k;
          }
        }
        if (seq[r] != best) consistent = false;
        w.path += "." + std::to_string(seq[r]);
        w.turns.push_back("Q" + w.path);
      }
      if (consistent) chosen = w;
    }
    finals.push_back(*chosen);
  }
  std::size_t pick = 0;
  for (std::size_t t = 1; t < finals.size(); ++t) {
    if (oracle_total(u, finals[t].path) > oracle_total(u, finals[pick].path)) pick = t;
  }
  return finals[pick].turns;
}

inline bool trace_selections_sound_for_test(const SearchTrace& trace) {
  for (const auto& r : trace.rounds) {
    const int chosen = r.candidates[r.selection.index].score.total;
    for (const auto& c : r.candidates) {
      if (c.score.total > chosen) return false;
      if (c.score.total == chosen && c.candidate_index < r.selection.index) return false;
    }
  }
  return trace_selections_sound(trace);
}

inline std::vector<std::string> turn_texts(const Dialogue& d) {
  std::vector<std::string> out;
  for (const auto& t : d.turns()) out.push_back(t.text);
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("triage-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Recursively compares two directory trees byte for byte. Returns the
/// relative paths that differ or exist on one side only.
inline std::vector<std::string> diff_trees(const std::filesystem::path& a, const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  auto listing = [](const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return files;
  };
  const auto la = listing(a);
  const auto lb = listing(b);
  std::vector<std::string> diffs;
  for (const auto& [k, v] : la) {
    auto it = lb.find(k);
    if (it == lb.end() || it->second != v) diffs.push_back(k);
  }
  for (const auto& [k, v] : lb) {
    if (!la.count(k)) diffs.push_back(k);
  }
  return diffs;
}

/// Code of the triage::Error thrown by fn, or nullopt when it returns.
template <typename F>
std::optional<ErrorCode> error_code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(TRIAGE_FIXTURES) / rel;
}

}  // namespace triage::testing

#endif  // TRIAGE_TESTS_SUPPORT_HPP_
