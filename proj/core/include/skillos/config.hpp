#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "skillos/evaluation.hpp"
#include "skillos/json_io.hpp"
#include "skillos/live_backend.hpp"

namespace skillos {

namespace fs = std::filesystem;

struct GatewayConfig {
  std::string backend = "scripted";  // scripted | live
  fs::path fixtures;                 // scripted: fixture file, optional
  bool strict = false;               // scripted: no offline fallback responders
  std::string embedder = "hashing";  // hashing | http
  std::size_t embedding_dimension = 256;
  llm::LiveBackendOptions live;
};

struct ExecutorConfig {
  std::string backend = "scripted";  // scripted | gateway | command
  Json script = Json::object();      // scripted: inline script
  fs::path script_file;              // scripted: script file, overrides inline
  std::string command;               // command: agent runtime template
  std::size_t max_parallel = 0;      // per layer, 0 = unbounded
};

struct Config {
  int branching = 7;
  int capacity = 10;  // floor(1.5 B) unless set explicitly
  std::size_t top_k = 10000;
  std::size_t shortlist_size = 8;
  std::size_t dormant_n = 5;
  double recipe_threshold = 0.92;
  double bt_alpha = 1.0;
  int tree_parallelism = 1;

  fs::path workspace = ".";
  fs::path corpus;     // directory of skill folders
  fs::path ecosystem;  // ecosystem JSON, alternative to corpus
  fs::path tree;       // defaults to <workspace>/tree.json
  std::vector<std::string> user_skills;

  GatewayConfig gateway;
  ExecutorConfig executor;
  eval::ConverterRegistry converters;
  eval::RenderOptions render;

  /// Relative paths resolve against base_dir. Unknown keys are rejected.
  static Config from_json(const Json& doc, const fs::path& base_dir = ".");
  static Config load(const fs::path& path);

  /// SKILLOS_* variables override file values.
  void apply_environment();
  /// Throws InvalidConfig.
  void validate() const;
  Json to_json() const;

  fs::path tree_path() const;
  fs::path runs_dir() const { return workspace / "runs"; }
  fs::path recipes_file() const { return workspace / "recipes.jsonl"; }
  fs::path rankings_dir() const { return workspace / "rankings"; }
};

}  // namespace skillos
