#include "skillos/gateway.hpp"

#include <cctype>
#include <cstdio>

#include "skillos/error.hpp"

namespace skillos::llm {

std::string_view to_string(RoleTag role) noexcept {
  switch (role) {
    case RoleTag::group_discovery: return "group_discovery";
    case RoleTag::skill_assignment: return "skill_assignment";
    case RoleTag::category_descent: return "category_descent";
    case RoleTag::category_refresh: return "category_refresh";
    case RoleTag::tree_traversal: return "tree_traversal";
    case RoleTag::prune_rank: return "prune_rank";
    case RoleTag::decompose: return "decompose";
    case RoleTag::node_execute: return "node_execute";
    case RoleTag::judge: return "judge";
  }
  return "unknown";
}

std::optional<RoleTag> parse_role(std::string_view name) noexcept {
  for (const auto role : kAllRoles) {
    if (to_string(role) == name) return role;
  }
  return std::nullopt;
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::transport: return "transport";
    case ErrorKind::schema_violation: return "schema_violation";
    case ErrorKind::refusal: return "refusal";
    case ErrorKind::fixture_miss: return "fixture_miss";
  }
  return "unknown";
}

std::string payload_hash(const Json& payload) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(payload.dump())));
  return buf;
}

std::string fixture_key(const ChatCall& call) {
  return std::string(to_string(call.role)) + ":" + payload_hash(call.payload);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Embedding HashingEmbedder::embed(std::string_view text) {
  if (text.empty()) throw Error(Errc::embedder_failure, "cannot embed empty text");
  Embedding v(dimension_, 0.0);
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.emplace_back(text);
  for (const auto& t : tokens) v[fnv1a64(t) % dimension_] += 1.0;
  normalize(v);
  return v;
}

ScriptedBackend::ScriptedBackend(Json fixtures, bool strict) : strict_(strict) {
  if (!fixtures.is_object()) {
    throw Error(Errc::invalid_config, "fixture document must be a JSON object");
  }
  for (auto& [key, doc] : fixtures.items()) fixtures_.emplace(key, doc);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path,
                                                            bool strict) {
  return std::make_shared<ScriptedBackend>(read_json_file(path), strict);
}

void ScriptedBackend::add_fixture(RoleTag role, const Json& payload, Json document) {
  fixtures_[fixture_key({role, payload})] = std::move(document);
}

void ScriptedBackend::add_fixture(std::string key, Json document) {
  fixtures_[std::move(key)] = std::move(document);
}

void ScriptedBackend::set_fallback(RoleTag role, Responder responder) {
  fallbacks_[role] = std::move(responder);
}

ChatResult ScriptedBackend::complete(const ChatCall& call) {
  const auto key = fixture_key(call);
  Json doc;
  if (const auto it = fixtures_.find(key); it != fixtures_.end()) {
    doc = it->second;
  } else if (const auto fb = fallbacks_.find(call.role); fb != fallbacks_.end() && !strict_) {
    try {
      doc = fb->second(call.payload);
    } catch (const Error& e) {
      const auto kind = e.code() == Errc::refusal ? ErrorKind::refusal : ErrorKind::transport;
      return ChatResult::failure(kind, e.what());
    }
  } else {
    return ChatResult::failure(ErrorKind::fixture_miss, "no fixture for " + key);
  }
  // Fixtures may encode a scripted failure: {"$error": "transport" | "refusal" | ...}.
  if (doc.is_object() && doc.contains("$error")) {
    const auto kind_name = doc["$error"].get<std::string>();
    ErrorKind kind = ErrorKind::transport;
    if (kind_name == "refusal") kind = ErrorKind::refusal;
    if (kind_name == "schema_violation") kind = ErrorKind::schema_violation;
    return ChatResult::failure(kind, "scripted " + kind_name + " for " + key);
  }
  if (auto violation = validate_response(call.role, doc)) {
    return ChatResult::failure(ErrorKind::schema_violation, key + ": " + *violation);
  }
  return ChatResult::success(std::move(doc));
}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<Embedder> embedder)
    : chat_(std::move(chat)), embedder_(std::move(embedder)) {
  if (!chat_ || !embedder_) throw Error(Errc::invalid_config, "gateway needs a chat backend and an embedder");
}

ChatResult Gateway::complete(const ChatCall& call) const {
  if (call.payload.is_null() || call.payload.empty()) {
    return ChatResult::failure(ErrorKind::schema_violation, "empty payload");
  }
  return chat_->complete(call);
}

Json Gateway::require(RoleTag role, Json payload) const {
  auto result = complete({role, std::move(payload)});
  if (result.ok) return std::move(result.document);
  Errc code = Errc::transport;
  switch (result.error_kind) {
    case ErrorKind::transport: code = Errc::transport; break;
    case ErrorKind::schema_violation: code = Errc::schema_violation; break;
    case ErrorKind::refusal: code = Errc::refusal; break;
    case ErrorKind::fixture_miss: code = Errc::fixture_miss; break;
  }
  throw Error(code, std::string(to_string(role)) + ": " + result.message);
}

Embedding Gateway::embed(std::string_view text) const { return embedder_->embed(text); }

}  // namespace skillos::llm
