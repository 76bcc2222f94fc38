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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "triage/triage.hpp"

namespace {

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 triage::SimulateOptions opt) {
  triage::EngineConfig cfg = triage::load_config(config_path);
  if (seed) triage::override_seed(cfg, *seed);
  const triage::SimulateSummary s = triage::cmd_simulate(cfg, opt);
  std::cout << s.succeeded << "/" << s.records << " dialogues written to " << s.out_dir.string() << "\n";
  return s.exit_code();
}

int run_evaluate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 triage::EvaluateOptions opt) {
  triage::EngineConfig cfg = triage::load_config(config_path);
  if (seed) triage::override_seed(cfg, *seed);
  const triage::EvaluateOutcome out = triage::cmd_evaluate(cfg, opt);
  std::cout << triage::format_report_table(out.report);
  if (!out.unmatched_generated.empty() || !out.unmatched_reference.empty()) {
    std::cerr << out.unmatched_generated.size() << " generated and " << out.unmatched_reference.size()
              << " reference dialogues had no counterpart\n";
  }
  return out.failures.empty() ? 0 : 1;
}

int run_serve(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& host,
              int port, std::optional<std::string> log_path) {
  triage::EngineConfig cfg = triage::load_config(config_path);
  if (seed) triage::override_seed(cfg, *seed);
  triage::SessionService::Options opts;
  opts.n_candidates = cfg.search.n_candidates;
  if (log_path) opts.log_path = *log_path;
  triage::SessionService service(triage::build_backends(cfg), triage::build_agents(cfg), opts);
  httplib::Server server;
  triage::bind_session_routes(server, service);
  std::cerr << "listening on " << host << ":" << port << " (" << service.session_count()
            << " sessions restored)\n";
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doctor-agent dialogue simulation with candidate ranking"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Engine configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured seed");

  triage::SimulateOptions sim;
  std::string sim_corpus;
  std::optional<std::string> sim_out, sim_hist, sim_split, sim_record;
  std::optional<std::size_t> sim_limit;
  auto* simulate = app.add_subcommand("simulate", "Run the ranked search over a corpus");
  simulate->add_option("--corpus", sim_corpus, "Corpus (JSON array or JSONL)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--histories", sim_hist, "History sidecar JSONL {id, history}");
  simulate->add_flag("--generate-histories", sim.generate_histories, "Synthesize missing histories");
  simulate->add_option("--split", sim_split, "Only simulate one split")->check(CLI::IsMember({"train", "validation", "test"}));
  simulate->add_option("--limit", sim_limit, "Simulate at most this many records");
  simulate->add_option("--jobs", sim.jobs, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "Output directory");
  simulate->add_option("--record-script", sim_record, "Write every backend exchange as a scripted fixture");

  triage::EvaluateOptions ev;
  std::string ev_generated, ev_reference, ev_avg = "micro";
  std::optional<std::string> ev_out;
  bool no_highlevel = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score generated dialogues against a reference corpus");
  evaluate->add_option("--generated", ev_generated, "Simulation output directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--reference", ev_reference, "Reference corpus")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out, "Report directory");
  evaluate->add_option("--f1-averaging", ev_avg, "micro or macro")->check(CLI::IsMember({"micro", "macro"}));
  evaluate->add_flag("--no-highlevel", no_highlevel, "Skip fluency/professionalism/safety scoring");
  evaluate->add_option("--jobs", ev.jobs, "Worker threads")->check(CLI::PositiveNumber);

  triage::ConvertOptions conv;
  std::string conv_in, conv_out;
  std::optional<std::string> conv_tag;
  auto* convert = app.add_subcommand("convert", "Convert an MIE-style annotated file to the corpus format");
  convert->add_option("--from-mie", conv_in, "MIE JSON file")->required()->check(CLI::ExistingFile);
  convert->add_option("--out", conv_out, "Output JSONL")->required();
  convert->add_option("--split-tag", conv_tag, "Tag every record with this split")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  convert->add_option("--id-prefix", conv.id_prefix, "Prefix for generated record ids");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> session_log;
  auto* serve = app.add_subcommand("serve", "Serve the interactive session API");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--session-log", session_log, "Append-only session log, replayed on start");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      sim.corpus = sim_corpus;
      if (sim_hist) sim.histories = *sim_hist;
      if (sim_out) sim.out_dir = *sim_out;
      if (sim_record) sim.record_script = *sim_record;
      sim.split = sim_split;
      sim.limit = sim_limit;
      return run_simulate(config_path, seed, sim);
    }
    if (*evaluate) {
      ev.generated = ev_generated;
      ev.reference_corpus = ev_reference;
      if (ev_out) ev.out_dir = *ev_out;
      ev.averaging = ev_avg == "macro" ? triage::F1Averaging::kMacro : triage::F1Averaging::kMicro;
      ev.highlevel = !no_highlevel;
      return run_evaluate(config_path, seed, ev);
    }
    if (*convert) {
      conv.from_mie = conv_in;
      conv.out = conv_out;
      conv.split_tag = conv_tag;
      const triage::ConvertResult r = triage::cmd_convert(conv);
      std::cout << r.records.size() << " records written, " << r.skipped_dialogues << " dialogues and "
                << r.skipped_labels << " labels skipped\n";
      return 0;
    }
    return run_serve(config_path, seed, host, port, session_log);
  } catch (const triage::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
