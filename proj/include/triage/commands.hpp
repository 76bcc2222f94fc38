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

// Batch commands behind the triage-loop CLI: simulate, evaluate, convert,
// and the HTTP binding of the session service.

#ifndef TRIAGE_COMMANDS_HPP_
#define TRIAGE_COMMANDS_HPP_

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "triage/config.hpp"
#include "triage/dataset.hpp"
#include "triage/metrics.hpp"
#include "triage/ranking.hpp"
#include "triage/session.hpp"

namespace triage {

namespace fs = std::filesystem;

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions escaping
/// fn terminate the worker loop and are rethrown after joining.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Record ids become file names; anything outside [A-Za-z0-9._-] maps to '_'.
inline std::string file_stem(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileUnreadable, "cannot write " + path.string());
  out << content;
}

inline std::string dump_pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  fs::path corpus;
  std::optional<fs::path> histories;
  std::optional<std::string> split;  // restrict to one split
  std::optional<std::size_t> limit;
  bool generate_histories = false;
  int jobs = 2;
  std::optional<fs::path> out_dir;  // overrides the config's output_dir
  std::optional<fs::path> record_script;
};

struct SimulateSummary {
  std::size_t records = 0;
  std::size_t succeeded = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, error)
  fs::path out_dir;

  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Layout written under the output directory:
///   dialogues/<id>.json   best dialogue per record
///   traces/<id>.jsonl     run log (partial for failed records)
///   histories.jsonl       the history each record was conditioned on
///   split.json            when a split was selected
///   summary.json          counts, failures, warnings, backend call totals
/// Nothing depends on wall-clock time or thread scheduling.
inline SimulateSummary cmd_simulate(const EngineConfig& cfg, const SimulateOptions& opt,
                                    std::ostream& log = std::cerr) {
  SimulateSummary summary;
  summary.out_dir = opt.out_dir.value_or(cfg.output_dir);

  LoadResult loaded = load_corpus(opt.corpus);
  for (const auto& e : loaded.errors) {
    log << "corpus record " << e.index << " (" << e.id << ") skipped: " << e.message << "\n";
  }
  std::vector<CorpusRecord> records = std::move(loaded.records);
  std::optional<Split> split;
  if (opt.split) {
    split = apply_split(records, cfg.split, cfg.seed);
    const auto& ids = split->get(*opt.split);
    const std::set<std::string> keep(ids.begin(), ids.end());
    std::erase_if(records, [&](const CorpusRecord& r) { return keep.count(r.id) == 0; });
  }
  std::sort(records.begin(), records.end(),
            [](const CorpusRecord& a, const CorpusRecord& b) { return a.id < b.id; });
  if (opt.limit && records.size() > *opt.limit) records.resize(*opt.limit);
  summary.records = records.size();

  BackendSet raw = build_backends(cfg);
  std::map<BackendRole, std::shared_ptr<RecordingBackend>> recorders;
  auto wrap = [&](BackendPtr& b, BackendRole role) {
    if (opt.record_script) {
      auto rec = std::make_shared<RecordingBackend>(b);
      recorders[role] = rec;
      b = rec;
    }
    auto counting = std::make_shared<CountingBackend>(b);
    b = counting;
    return counting;
  };
  std::vector<std::shared_ptr<CountingBackend>> counters = {
      wrap(raw.doctor, BackendRole::kDoctor), wrap(raw.patient, BackendRole::kPatient),
      wrap(raw.judge, BackendRole::kJudge), wrap(raw.extractor, BackendRole::kExtractor)};

  const Agents agents = build_agents(cfg);
  const RankingEngine engine(raw, agents, cfg.search);
  std::map<std::string, std::string> sidecar;
  if (opt.histories) sidecar = load_history_sidecar(*opt.histories);
  HistorySources sources{opt.histories ? &sidecar : nullptr,
                         opt.generate_histories ? raw.patient.get() : nullptr, &agents};

  struct Outcome {
    std::optional<std::string> error;
    std::optional<MedicalHistory> history;
    std::vector<std::string> warnings;
  };
  std::vector<Outcome> outcomes(records.size());
  fs::create_directories(summary.out_dir / "dialogues");
  fs::create_directories(summary.out_dir / "traces");

  parallel_for(records.size(), opt.jobs, [&](std::size_t i) {
    const CorpusRecord& rec = records[i];
    const std::string stem = file_stem(rec.id);
    Outcome& out = outcomes[i];
    SearchTrace trace;
    try {
      const CorpusRecord with_history = attach_history(rec, sources);
      out.history = with_history.history;
      SearchResult result = engine.run_search(*with_history.history, rec.turns.front().text, rec.id);
      nlohmann::json dj = result.best;
      write_file(summary.out_dir / "dialogues" / (stem + ".json"), dump_pretty(dj));
      trace = std::move(result.trace);
    } catch (const SearchFailure& e) {
      out.error = e.what();
      trace = e.trace();
    } catch (const Error& e) {
      out.error = e.what();
    }
    out.warnings = trace.warnings;
    std::string lines;
    for (const auto& r : trace_records(trace)) lines += r.dump() + "\n";
    write_file(summary.out_dir / "traces" / (stem + ".jsonl"), lines);
  });

  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json warnings = nlohmann::json::object();
  std::string histories;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcomes[i].error) {
      summary.failures.emplace_back(records[i].id, *outcomes[i].error);
      failures.push_back({{"id", records[i].id}, {"error", *outcomes[i].error}});
      log << "record " << records[i].id << " failed: " << *outcomes[i].error << "\n";
    } else {
      ++summary.succeeded;
    }
    if (!outcomes[i].warnings.empty()) warnings[records[i].id] = outcomes[i].warnings;
    if (outcomes[i].history) {
      histories += nlohmann::json{{"id", records[i].id},
                                  {"history", outcomes[i].history->text},
                                  {"source", source_name(outcomes[i].history->source)}}
                       .dump() +
                   "\n";
    }
  }
  write_file(summary.out_dir / "histories.jsonl", histories);
  if (split) write_file(summary.out_dir / "split.json", dump_pretty(split_json(*split)));

  nlohmann::json calls = nlohmann::json::object();
  for (BackendRole role : kAllBackendRoles) {
    std::size_t n = 0;
    for (const auto& c : counters) n += c->calls(role);
    calls[std::string(backend_role_name(role))] = n;
  }
  write_file(summary.out_dir / "summary.json",
             dump_pretty({{"records", summary.records},
                          {"succeeded", summary.succeeded},
                          {"failures", failures},
                          {"warnings", warnings},
                          {"search", {{"n_candidates", cfg.search.n_candidates},
                                      {"max_rounds", cfg.search.max_rounds}}},
                          {"backend_calls", calls}}));

  if (opt.record_script) {
    nlohmann::json merged{{"entries", nlohmann::json::array()}};
    std::map<std::string, nlohmann::json> by_key;
    for (const auto& [role, rec] : recorders) {
      const nlohmann::json recorded = rec->script_json();
      for (const auto& e : recorded["entries"]) {
        by_key.emplace(e["role"].get<std::string>() + ":" + e["key"].get<std::string>(), e);
      }
    }
    for (auto& [k, e] : by_key) merged["entries"].push_back(e);
    write_file(*opt.record_script, dump_pretty(merged));
  }
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path generated;  // a simulate output dir, or a directory of dialogue files
  fs::path reference_corpus;
  std::optional<fs::path> out_dir;
  F1Averaging averaging = F1Averaging::kMicro;
  bool highlevel = true;
  int jobs = 2;
};

struct EvaluateOutcome {
  MetricReport report;
  std::vector<std::string> unmatched_generated;
  std::vector<std::string> unmatched_reference;
  std::vector<std::pair<std::string, std::string>> failures;
  fs::path out_dir;
};

/// Writes report.json, report.txt (fixed-width table) and per_dialogue.jsonl.
/// A generated dialogue file may carry its own "labels"; otherwise the
/// extractor backend labels it.
inline EvaluateOutcome cmd_evaluate(const EngineConfig& cfg, const EvaluateOptions& opt,
                                    std::ostream& log = std::cerr) {
  EvaluateOutcome outcome;
  outcome.out_dir = opt.out_dir.value_or(opt.generated / "evaluation");

  std::map<std::string, CorpusRecord> refs;
  for (auto& r : load_corpus(opt.reference_corpus).records) refs.emplace(r.id, std::move(r));

  const fs::path dir = fs::is_directory(opt.generated / "dialogues") ? opt.generated / "dialogues"
                                                                       : opt.generated;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kFileUnreadable, dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  struct Item {
    Dialogue generated;
    std::optional<std::set<DiagnosticLabel>> labels;
  };
  std::map<std::string, Item> generated;
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, f.string() + ": " + e.what());
    }
    Dialogue d = dialogue_from_json(j);
    std::optional<std::set<DiagnosticLabel>> labels;
    if (j.contains("labels")) {
      labels.emplace();
      for (const auto& l : j["labels"]) labels->insert(label_from_json(l));
    }
    const std::string id = d.id();
    generated.emplace(id, Item{std::move(d), std::move(labels)});
  }

  std::vector<std::string> ids;
  for (const auto& [id, item] : generated) {
    if (refs.count(id)) ids.push_back(id);
    else outcome.unmatched_generated.push_back(id);
  }
  for (const auto& [id, r] : refs) {
    if (!generated.count(id)) outcome.unmatched_reference.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::kEmptyIntersection, "no generated dialogue matches the reference corpus");

  const BackendSet backends = build_backends(cfg);
  const Agents agents = build_agents(cfg);
  std::vector<std::optional<EvaluationRun>> runs(ids.size());
  std::vector<std::optional<std::string>> errors(ids.size());
  parallel_for(ids.size(), opt.jobs, [&](std::size_t i) {
    const Item& item = generated.at(ids[i]);
    const CorpusRecord& ref = refs.at(ids[i]);
    try {
      EvaluationRun run{item.generated, reference_dialogue(ref), {}, ref.labels, std::nullopt};
      run.predicted = item.labels ? *item.labels
                                  : agents.extract_diagnostics(*backends.extractor, item.generated).labels;
      if (opt.highlevel) run.highlevel = agents.highlevel_scores(*backends.judge, item.generated);
      runs[i] = std::move(run);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  std::vector<EvaluationRun> ok;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (runs[i]) {
      ok.push_back(std::move(*runs[i]));
    } else {
      outcome.failures.emplace_back(ids[i], *errors[i]);
      log << "dialogue " << ids[i] << " not evaluated: " << *errors[i] << "\n";
    }
  }
  if (ok.empty()) throw Error(ErrorCode::kEmptyCorpus, "every dialogue failed evaluation");
  outcome.report = corpus_report(ok, cfg.tokenizer, opt.averaging);

  nlohmann::json rj = report_json(outcome.report);
  rj["unmatched_generated"] = outcome.unmatched_generated;
  rj["unmatched_reference"] = outcome.unmatched_reference;
  nlohmann::json fj = nlohmann::json::array();
  for (const auto& [id, err] : outcome.failures) fj.push_back({{"id", id}, {"error", err}});
  rj["failures"] = fj;
  write_file(outcome.out_dir / "report.json", dump_pretty(rj));
  write_file(outcome.out_dir / "report.txt", format_report_table(outcome.report));
  std::string per;
  for (const auto& d : outcome.report.per_dialogue) per += dialogue_scores_json(d).dump() + "\n";
  write_file(outcome.out_dir / "per_dialogue.jsonl", per);
  return outcome;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertOptions {
  fs::path from_mie;
  fs::path out;
  std::optional<std::string> split_tag;
  std::string id_prefix = "mie-";
};

inline ConvertResult cmd_convert(const ConvertOptions& opt) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_file(opt.from_mie));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, opt.from_mie.string() + ": " + e.what());
  }
  ConvertResult result = convert_mie(root, opt.id_prefix, opt.split_tag);
  write_file(opt.out, serialize_corpus(result.records));
  return result;
}

// ---------------------------------------------------------------------------
// serve

/// Exposes SessionService on `server`. Responses are JSON; CORS is open so
/// a browser client on another origin can call in.
inline void bind_session_routes(httplib::Server& server, SessionService& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/sessions.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Post("/sessions", forward);
  server.Get(R"(/sessions/([^/]+))", forward);
  server.Post(R"(/sessions/([^/]+)/(patient|finish))", forward);
}

}  // namespace triage

#endif  // TRIAGE_COMMANDS_HPP_
