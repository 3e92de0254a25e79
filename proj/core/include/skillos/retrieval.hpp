#pragma once

#include <span>
#include <string>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/registry.hpp"
#include "skillos/tree.hpp"

namespace skillos::retrieval {

struct TaskRequest {
  std::string task_id;
  std::string description;
  Embedding embedding;
  std::vector<std::string> user_added_ids;
};

TaskRequest make_task(std::string task_id, std::string description, const llm::Gateway& gateway,
                      std::vector<std::string> user_added_ids = {});

enum class Origin { tree, dormant, user };

std::string_view to_string(Origin origin) noexcept;

struct Candidate {
  std::string skill_id;
  Origin origin = Origin::tree;
};

/// Ordered and duplicate-free.
using CandidateSet = std::vector<Candidate>;

/// Walks the tree level by level. Each level sends one tree_traversal call
/// listing the frontier's child categories; leaves directly under a reached
/// node become candidates.
CandidateSet traverse_retrieve(const tree::CapabilityTree& tree, const TaskRequest& task,
                               const llm::Gateway& gateway);

CandidateSet augment_with_dormant(CandidateSet candidates, const TaskRequest& task,
                                  const registry::DormantIndex& index, std::size_t n,
                                  llm::Embedder& embedder);

struct ShortlistEntry {
  std::string skill_id;
  int rank = 0;
  std::string rationale;
  Origin origin = Origin::tree;
};

struct Shortlist {
  std::vector<ShortlistEntry> ranked;

  std::vector<std::string> ids() const;
  bool contains(std::string_view id) const;
  Json to_json() const;
  static Shortlist from_json(const Json& doc);
};

/// One prune_rank call; kept ids are ordered by the model's rank, truncated
/// to M and renumbered 1..n. Ids outside the candidate set are discarded.
Shortlist prune_rank(const CandidateSet& candidates, const TaskRequest& task, std::size_t m,
                     const registry::Ecosystem& eco, const llm::Gateway& gateway);

/// V = shortlist ∪ user additions. Additions are appended with origin `user`.
Shortlist finalize_selection(Shortlist shortlist, std::span<const std::string> user_added_ids,
                             const registry::Ecosystem& eco);

struct RetrievalConfig {
  std::size_t m = 8;
  std::size_t dormant_n = 5;
};

/// traverse → augment → prune; user additions are applied separately.
Shortlist retrieve(const tree::CapabilityTree& tree, const registry::DormantIndex& index,
                   const registry::Ecosystem& eco, const TaskRequest& task,
                   const RetrievalConfig& config, const llm::Gateway& gateway);

}  // namespace skillos::retrieval
