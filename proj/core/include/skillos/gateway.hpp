#pragma once

// Single choke point for model calls. Every structured completion goes
// through a ChatBackend and every embedding through an Embedder; the Gateway
// bundles one of each.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "skillos/json_io.hpp"
#include "skillos/vector_math.hpp"

namespace skillos::llm {

enum class RoleTag {
  group_discovery,
  skill_assignment,
  category_descent,
  category_refresh,
  tree_traversal,
  prune_rank,
  decompose,
  node_execute,
  judge,
};

inline constexpr RoleTag kAllRoles[] = {
    RoleTag::group_discovery, RoleTag::skill_assignment, RoleTag::category_descent,
    RoleTag::category_refresh, RoleTag::tree_traversal,  RoleTag::prune_rank,
    RoleTag::decompose,        RoleTag::node_execute,    RoleTag::judge,
};

std::string_view to_string(RoleTag role) noexcept;
std::optional<RoleTag> parse_role(std::string_view name) noexcept;

/// Response schema identifier; one per role.
std::string_view schema_id(RoleTag role) noexcept;

/// Returns a description of the first schema violation, or nullopt when the
/// document conforms to the role's response schema.
std::optional<std::string> validate_response(RoleTag role, const Json& document);

/// Instruction text sent as the system message for a role on live backends.
std::string_view role_instructions(RoleTag role) noexcept;

struct ChatCall {
  RoleTag role;
  Json payload;
};

/// Payloads serialize with sorted keys, so the hash is stable across runs.
std::string payload_hash(const Json& payload);

/// "role_tag:payload_hash", the scripted-backend fixture key.
std::string fixture_key(const ChatCall& call);

enum class ErrorKind { transport, schema_violation, refusal, fixture_miss };

std::string_view to_string(ErrorKind kind) noexcept;

struct ChatResult {
  bool ok = false;
  Json document;
  ErrorKind error_kind = ErrorKind::transport;
  std::string message;

  static ChatResult success(Json doc) { return {true, std::move(doc), ErrorKind::transport, {}}; }
  static ChatResult failure(ErrorKind kind, std::string msg) {
    return {false, Json(), kind, std::move(msg)};
  }
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResult complete(const ChatCall& call) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Unit-norm vector of fixed dimension.
  virtual Embedding embed(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
};

/// Token-hashing bag of words: lowercase alphanumeric tokens, each counted
/// into bucket fnv1a64(token) % D, then L2-normalized.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
  Embedding embed(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
};

std::vector<std::string> tokenize(std::string_view text);

/// Replays fixture documents keyed by (role, payload hash). In lenient mode a
/// miss falls back to the role's registered responder; strict mode ignores
/// responders and reports FixtureMiss. Replayed documents are schema-checked
/// like live responses.
class ScriptedBackend final : public ChatBackend {
 public:
  using Responder = std::function<Json(const Json& payload)>;

  explicit ScriptedBackend(Json fixtures = Json::object(), bool strict = false);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path,
                                                    bool strict = false);

  void add_fixture(RoleTag role, const Json& payload, Json document);
  void add_fixture(std::string key, Json document);
  void set_fallback(RoleTag role, Responder responder);
  bool strict() const noexcept { return strict_; }

  ChatResult complete(const ChatCall& call) override;

 private:
  std::map<std::string, Json> fixtures_;
  std::map<RoleTag, Responder> fallbacks_;
  bool strict_;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<Embedder> embedder);

  ChatResult complete(const ChatCall& call) const;

  /// Completes and returns the document, throwing skillos::Error with the
  /// matching code (transport, schema_violation, refusal, fixture_miss).
  Json require(RoleTag role, Json payload) const;

  Embedding embed(std::string_view text) const;
  std::size_t embedding_dimension() const { return embedder_->dimension(); }

  const std::shared_ptr<Embedder>& embedder() const { return embedder_; }

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<Embedder> embedder_;
};

}  // namespace skillos::llm
