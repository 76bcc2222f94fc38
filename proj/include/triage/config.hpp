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

#ifndef TRIAGE_CONFIG_HPP_
#define TRIAGE_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "triage/agents.hpp"
#include "triage/backend.hpp"
#include "triage/dataset.hpp"
#include "triage/error.hpp"
#include "triage/http_backend.hpp"
#include "triage/metrics.hpp"
#include "triage/prompts.hpp"
#include "triage/ranking.hpp"

namespace triage {

inline constexpr std::array<BackendRole, 4> kAllBackendRoles = {
    BackendRole::kDoctor, BackendRole::kPatient, BackendRole::kJudge, BackendRole::kExtractor};

struct EngineConfig {
  std::map<BackendRole, BackendConfig> backends;
  /// Roles that reuse another role's backend instance ("patient": "judge").
  std::map<BackendRole, BackendRole> aliases;
  SearchConfig search;
  GenerationParams generation;
  TokenizerMode tokenizer = TokenizerMode::kWhitespaceLower;
  std::optional<std::filesystem::path> prompt_catalog;
  std::filesystem::path output_dir = "runs";
  SplitSpec split;
  std::uint64_t seed = 0;
};

/// Relative paths resolve against `base_dir`. Every referenced file or
/// directory must exist.
inline EngineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  EngineConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    const auto& backends = j.at("backends");
    for (BackendRole role : kAllBackendRoles) {
      const std::string name(backend_role_name(role));
      if (!backends.contains(name)) {
        throw Error(ErrorCode::kInvalidConfig, "backends." + name + " is missing");
      }
      const auto& entry = backends[name];
      if (entry.is_string()) {
        cfg.aliases[role] = parse_backend_role(entry.get<std::string>());
      } else {
        cfg.backends[role] = backend_config_from_json(entry, base_dir);
      }
    }
    for (const auto& [role, target] : cfg.aliases) {
      if (cfg.backends.count(target) == 0) {
        throw Error(ErrorCode::kInvalidConfig, "backends." + std::string(backend_role_name(role)) +
                                                   " must alias a role with its own config");
      }
    }
    if (j.contains("search")) {
      const auto& s = j["search"];
      cfg.search.n_candidates = s.value("n_candidates", cfg.search.n_candidates);
      cfg.search.max_rounds = s.value("max_rounds", cfg.search.max_rounds);
      cfg.search.stop_on_patient_end = s.value("stop_on_patient_end", cfg.search.stop_on_patient_end);
      if (s.value("tie_break", std::string("first_index")) != "first_index") {
        throw Error(ErrorCode::kInvalidConfig, "tie_break must be first_index");
      }
    }
    validate(cfg.search);
    if (j.contains("generation")) {
      cfg.generation.max_tokens = j["generation"].value("max_tokens", cfg.generation.max_tokens);
      cfg.generation.temperature = j["generation"].value("temperature", cfg.generation.temperature);
    }
    if (cfg.generation.max_tokens <= 0 || cfg.generation.temperature < 0) {
      throw Error(ErrorCode::kInvalidConfig, "generation.max_tokens > 0 and temperature >= 0 required");
    }
    cfg.tokenizer = parse_tokenizer(j.value("tokenizer", std::string("whitespace_lower")));
    if (j.contains("prompt_catalog")) cfg.prompt_catalog = resolve(j["prompt_catalog"].get<std::string>());
    if (j.contains("output_dir")) cfg.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("split")) {
      cfg.split.train = j["split"].value("train", cfg.split.train);
      cfg.split.validation = j["split"].value("validation", cfg.split.validation);
      cfg.split.test = j["split"].value("test", cfg.split.test);
    }
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }

  if (cfg.prompt_catalog && !std::filesystem::is_directory(*cfg.prompt_catalog)) {
    throw Error(ErrorCode::kInvalidConfig, "prompt catalog not found: " + cfg.prompt_catalog->string());
  }
  for (const auto& [role, b] : cfg.backends) {
    if (b.script_path && !std::filesystem::is_regular_file(*b.script_path)) {
      throw Error(ErrorCode::kInvalidConfig, "script not found: " + b.script_path->string());
    }
  }
  cfg.generation.seed = cfg.seed;
  return cfg;
}

inline EngineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// Reseeds everything that derives from the top-level seed.
inline void override_seed(EngineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.generation.seed = seed;
}

inline BackendSet build_backends(const EngineConfig& cfg) {
  std::map<BackendRole, BackendPtr> built;
  for (const auto& [role, b] : cfg.backends) built[role] = make_backend(b, std::string(backend_role_name(role)));
  for (const auto& [role, target] : cfg.aliases) built[role] = built.at(target);
  return BackendSet{built.at(BackendRole::kDoctor), built.at(BackendRole::kPatient),
                    built.at(BackendRole::kJudge), built.at(BackendRole::kExtractor)};
}

inline Agents build_agents(const EngineConfig& cfg) {
  return Agents(cfg.prompt_catalog ? load_catalog(*cfg.prompt_catalog) : default_catalog(),
                cfg.generation);
}

}  // namespace triage

#endif  // TRIAGE_CONFIG_HPP_
