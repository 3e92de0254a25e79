#pragma once

// Node-level recursive categorization: builds the capability tree breadth
// first by alternating group discovery and skill assignment, and inserts new
// skills incrementally.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/registry.hpp"
#include "skillos/tree.hpp"

namespace skillos::tree {

using SkillTable = std::map<std::string, registry::Skill, std::less<>>;

struct GroupSpec {
  std::string name;
  std::string description;
};

struct GroupProposal {
  std::vector<GroupSpec> groups;
  int target_min = 0;
  int target_max = 0;
  bool repaired = false;  // count was clamped after the retry
};

/// The five categories every root is partitioned into.
const std::vector<GroupSpec>& fixed_root_groups();

/// Root: the fixed five. Otherwise one group_discovery call; an out-of-range
/// count is retried once, then repaired by merging the smallest groups or
/// splitting the largest (sizes estimated by embedding-nearest membership).
GroupProposal discover_groups(const CategoryNode& node, bool is_root, const TreeConfig& config,
                              const SkillTable& skills, const llm::Gateway& gateway, int round = 1);

struct Assignment {
  std::map<std::string, int> group_of;
  std::vector<std::string> unassigned;
};

/// Partial map: ids the model omits, invents, or sends to a nonexistent
/// group stay unassigned.
Assignment assign_skills(const CategoryNode& node, const GroupProposal& proposal,
                         std::span<const std::string> skill_ids, const SkillTable& skills,
                         const llm::Gateway& gateway, int pass = 1, int round = 1);

struct ChildGroup {
  std::string name;
  std::string description;
  std::vector<std::string> skill_ids;
  bool recurse = false;  // |skills| >= C
};

/// Reassigns orphans once, merges singleton groups into their most relevant
/// surviving group (refreshing its name/description), sends persistent
/// orphans to the largest group and drops empty groups.
std::vector<ChildGroup> resolve_special_cases(const CategoryNode& node, const GroupProposal& proposal,
                                              const Assignment& assignment, const TreeConfig& config,
                                              const SkillTable& skills, const llm::Gateway& gateway,
                                              int round = 1);

struct BuildOptions {
  int parallelism = 1;  // nodes of one BFS level categorized concurrently
};

struct BuildReport {
  std::vector<std::string> degenerate_nodes;  // leafified after two one-group rounds
  std::vector<std::string> repaired_nodes;    // group count clamped
};

CapabilityTree build_tree(std::span<const registry::Skill> active_skills, const TreeConfig& config,
                          const llm::Gateway& gateway, const BuildOptions& options = {},
                          BuildReport* report = nullptr);

struct InsertResult {
  CapabilityTree tree;
  std::vector<std::string> path;  // root .. parent of the new leaf
  std::string leaf_id;
};

/// Descends one category per level, appends the skill as a new leaf and
/// refreshes every non-root category on the path bottom-up.
InsertResult insert_skill(const CapabilityTree& tree, const registry::Skill& skill,
                          const llm::Gateway& gateway);

}  // namespace skillos::tree
