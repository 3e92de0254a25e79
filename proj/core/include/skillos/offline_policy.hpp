#pragma once

#include <memory>

#include "skillos/gateway.hpp"

namespace skillos::llm {

/// Deterministic, embedding-driven stand-in for the model on every role.
/// It lets the whole pipeline run with no network: categories come from
/// k-means over skill embeddings, selections and rankings from cosine
/// similarity to the task, plans from fixed per-strategy shapes, node
/// execution writes one file per expected output, and the judge prefers the
/// side with more rendered content.
class OfflinePolicy {
 public:
  explicit OfflinePolicy(std::shared_ptr<Embedder> embedder);

  Json respond(RoleTag role, const Json& payload) const;

  /// Registers this policy as the fallback responder for every role.
  void install(ScriptedBackend& backend) const;

 private:
  Json discover(const Json& payload) const;
  Json assign(const Json& payload) const;
  Json descend(const Json& payload) const;
  Json refresh(const Json& payload) const;
  Json traverse(const Json& payload) const;
  Json prune(const Json& payload) const;
  Json decompose(const Json& payload) const;
  Json execute(const Json& payload) const;
  Json judge(const Json& payload) const;

  std::shared_ptr<Embedder> embedder_;
};

}  // namespace skillos::llm
