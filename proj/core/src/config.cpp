#include "skillos/config.hpp"

#include <cstdlib>
#include <set>

#include "skillos/error.hpp"
#include "skillos/tree.hpp"

namespace skillos {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  if (path.is_absolute() || base.empty() || base == ".") return path;
  return base / path;
}

void reject_unknown(const Json& doc, std::initializer_list<const char*> known, const std::string& where) {
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [k, v] : doc.items()) {
    if (!names.contains(k)) throw Error(Errc::invalid_config, "unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get(const Json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc[key].is_null()) return fallback;
  try {
    return doc[key].get<T>();
  } catch (const Json::exception&) {
    throw Error(Errc::invalid_config, std::string("bad value for '") + key + "'");
  }
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

long long env_int(const char* name, const char* value) {
  try {
    std::size_t pos = 0;
    const auto x = std::stoll(value, &pos);
    if (pos != std::string(value).size()) throw std::invalid_argument(name);
    return x;
  } catch (const std::exception&) {
    throw Error(Errc::invalid_config, std::string(name) + " must be an integer");
  }
}

}  // namespace

Config Config::from_json(const Json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
  reject_unknown(doc,
                 {"branching_factor", "capacity", "top_k", "shortlist_size", "dormant_n", "recipe_threshold",
                  "bt_alpha", "tree_parallelism", "workspace", "corpus", "ecosystem", "tree", "user_skills",
                  "gateway", "executor", "converters", "render"},
                 "config");
  Config c;
  c.branching = get(doc, "branching_factor", 7);
  c.capacity = get(doc, "capacity", tree::capacity_for(c.branching));
  c.top_k = get<std::size_t>(doc, "top_k", 10000);
  c.shortlist_size = get<std::size_t>(doc, "shortlist_size", 8);
  c.dormant_n = get<std::size_t>(doc, "dormant_n", 5);
  c.recipe_threshold = get(doc, "recipe_threshold", 0.92);
  c.bt_alpha = get(doc, "bt_alpha", 1.0);
  c.tree_parallelism = get(doc, "tree_parallelism", 1);
  c.workspace = resolve(base_dir, get<std::string>(doc, "workspace", "."));
  c.corpus = resolve(base_dir, get<std::string>(doc, "corpus", ""));
  c.ecosystem = resolve(base_dir, get<std::string>(doc, "ecosystem", ""));
  c.tree = resolve(base_dir, get<std::string>(doc, "tree", ""));
  c.user_skills = get<std::vector<std::string>>(doc, "user_skills", {});

  if (doc.contains("gateway")) {
    const auto& g = doc["gateway"];
    reject_unknown(g,
                   {"backend", "fixtures", "strict", "embedder", "embedding_dimension", "base_url", "api_key",
                    "default_model", "models", "schema_retries", "max_concurrent_calls", "timeout_seconds",
                    "embedding_model"},
                   "gateway");
    c.gateway.backend = get<std::string>(g, "backend", "scripted");
    c.gateway.fixtures = resolve(base_dir, get<std::string>(g, "fixtures", ""));
    c.gateway.strict = get(g, "strict", false);
    c.gateway.embedder = get<std::string>(g, "embedder", "hashing");
    c.gateway.embedding_dimension = get<std::size_t>(g, "embedding_dimension", 256);
    auto& live = c.gateway.live;
    live.base_url = get<std::string>(g, "base_url", "");
    live.api_key = get<std::string>(g, "api_key", "");
    live.default_model = get<std::string>(g, "default_model", "");
    live.schema_retries = get(g, "schema_retries", 2);
    live.max_concurrent_calls = get(g, "max_concurrent_calls", 4);
    live.timeout_seconds = get(g, "timeout_seconds", 120);
    live.embedding_model = get<std::string>(g, "embedding_model", "");
    const auto models = get<Json>(g, "models", Json::object());
    for (const auto& [role, model] : models.items()) {
      const auto tag = llm::parse_role(role);
      if (!tag) throw Error(Errc::invalid_config, "unknown role '" + role + "' in gateway.models");
      live.models[*tag] = model.get<std::string>();
    }
  }
  if (doc.contains("executor")) {
    const auto& e = doc["executor"];
    reject_unknown(e, {"backend", "script", "command", "max_parallel"}, "executor");
    c.executor.backend = get<std::string>(e, "backend", "scripted");
    if (e.contains("script") && e["script"].is_string()) {
      c.executor.script_file = resolve(base_dir, e["script"].get<std::string>());
    } else {
      c.executor.script = get<Json>(e, "script", Json::object());
    }
    c.executor.command = get<std::string>(e, "command", "");
    c.executor.max_parallel = get<std::size_t>(e, "max_parallel", 0);
  }
  c.converters = eval::ConverterRegistry::from_json(get<Json>(doc, "converters", Json()));
  if (doc.contains("render")) {
    const auto& r = doc["render"];
    reject_unknown(r, {"l_max", "video_frames", "image_long_edge"}, "render");
    c.render.l_max = get<std::size_t>(r, "l_max", 20000);
    c.render.video_frames = get(r, "video_frames", 8);
    c.render.image_long_edge = get(r, "image_long_edge", 1024);
  }
  return c;
}

Config Config::load(const fs::path& path) {
  auto c = from_json(read_json_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
  return c;
}

void Config::apply_environment() {
  if (const auto* v = env("SKILLOS_WORKSPACE")) workspace = v;
  if (const auto* v = env("SKILLOS_CORPUS")) corpus = v;
  if (const auto* v = env("SKILLOS_BRANCHING_FACTOR")) {
    const bool derived = capacity == tree::capacity_for(branching);
    branching = static_cast<int>(env_int("SKILLOS_BRANCHING_FACTOR", v));
    if (derived) capacity = tree::capacity_for(branching);
  }
  if (const auto* v = env("SKILLOS_TOP_K")) top_k = static_cast<std::size_t>(env_int("SKILLOS_TOP_K", v));
  if (const auto* v = env("SKILLOS_SHORTLIST_SIZE")) {
    shortlist_size = static_cast<std::size_t>(env_int("SKILLOS_SHORTLIST_SIZE", v));
  }
  if (const auto* v = env("SKILLOS_RECIPE_THRESHOLD")) {
    try {
      recipe_threshold = std::stod(v);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_config, "SKILLOS_RECIPE_THRESHOLD must be a number");
    }
  }
  if (const auto* v = env("SKILLOS_GATEWAY_BACKEND")) gateway.backend = v;
  if (const auto* v = env("SKILLOS_FIXTURES")) gateway.fixtures = v;
  llm::apply_environment(gateway.live);
}

void Config::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (branching < 4) fail("branching_factor must be at least 4");
  if (capacity < 2) fail("capacity must be at least 2");
  if (top_k < 1) fail("top_k must be at least 1");
  if (shortlist_size < 1) fail("shortlist_size must be at least 1");
  if (!(recipe_threshold > 0.0 && recipe_threshold <= 1.0)) fail("recipe_threshold must lie in (0, 1]");
  if (bt_alpha < 0.0) fail("bt_alpha must be non-negative");
  if (tree_parallelism < 1) fail("tree_parallelism must be at least 1");
  if (gateway.backend != "scripted" && gateway.backend != "live") fail("gateway.backend must be scripted or live");
  if (gateway.embedder != "hashing" && gateway.embedder != "http") fail("gateway.embedder must be hashing or http");
  if (gateway.embedding_dimension < 1) fail("gateway.embedding_dimension must be positive");
  if (gateway.backend == "live" && gateway.live.base_url.empty()) fail("live gateway needs base_url");
  if (gateway.backend == "live" && gateway.live.default_model.empty() && gateway.live.models.empty()) {
    fail("live gateway needs default_model or per-role models");
  }
  if (gateway.embedder == "http" && gateway.live.base_url.empty()) fail("http embedder needs base_url");
  if (gateway.live.schema_retries < 0) fail("schema_retries must be non-negative");
  if (gateway.live.max_concurrent_calls < 1) fail("max_concurrent_calls must be at least 1");
  const auto& b = executor.backend;
  if (b != "scripted" && b != "gateway" && b != "command") fail("executor.backend must be scripted, gateway or command");
  if (b == "command" && executor.command.empty()) fail("command executor needs a command template");
  if (render.l_max < 1 || render.video_frames < 1 || render.image_long_edge < 1) fail("render limits must be positive");
}

fs::path Config::tree_path() const { return tree.empty() ? workspace / "tree.json" : tree; }

Json Config::to_json() const {
  Json models = Json::object();
  for (const auto& [role, m] : gateway.live.models) models[std::string(llm::to_string(role))] = m;
  return {
      {"branching_factor", branching},
      {"capacity", capacity},
      {"top_k", top_k},
      {"shortlist_size", shortlist_size},
      {"dormant_n", dormant_n},
      {"recipe_threshold", recipe_threshold},
      {"bt_alpha", bt_alpha},
      {"tree_parallelism", tree_parallelism},
      {"workspace", workspace.string()},
      {"corpus", corpus.string()},
      {"ecosystem", ecosystem.string()},
      {"tree", tree.string()},
      {"user_skills", user_skills},
      {"gateway",
       {{"backend", gateway.backend},
        {"fixtures", gateway.fixtures.string()},
        {"strict", gateway.strict},
        {"embedder", gateway.embedder},
        {"embedding_dimension", gateway.embedding_dimension},
        {"base_url", gateway.live.base_url},
        {"default_model", gateway.live.default_model},
        {"models", models},
        {"schema_retries", gateway.live.schema_retries},
        {"max_concurrent_calls", gateway.live.max_concurrent_calls},
        {"timeout_seconds", gateway.live.timeout_seconds},
        {"embedding_model", gateway.live.embedding_model}}},
      {"executor",
       {{"backend", executor.backend},
        {"script", executor.script_file.empty() ? executor.script : Json(executor.script_file.string())},
        {"command", executor.command},
        {"max_parallel", executor.max_parallel}}},
      {"converters", converters.to_json()},
      {"render", {{"l_max", render.l_max}, {"video_frames", render.video_frames}, {"image_long_edge", render.image_long_edge}}},
  };
}

}  // namespace skillos
