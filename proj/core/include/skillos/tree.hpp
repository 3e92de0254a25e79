#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillos/json_io.hpp"

namespace skillos::tree {

enum class NodeKind { category, leaf };

std::string_view to_string(NodeKind kind) noexcept;

struct CategoryNode {
  std::string node_id;
  std::string name;
  std::string description;
  std::vector<std::string> children;   // ordered node ids
  std::vector<std::string> skill_ids;  // S_n, sorted ascending
  NodeKind kind = NodeKind::category;

  bool is_leaf() const noexcept { return kind == NodeKind::leaf; }
};

struct TreeConfig {
  int branching = 7;  // B
  int capacity = 10;  // C

  /// C = floor(1.5 B).
  static TreeConfig from_branching(int branching);
  int min_groups() const noexcept { return branching - 3; }
  int max_groups() const noexcept { return branching + 2; }
  /// Throws InvalidConfig unless B >= 4 and C >= 2.
  void validate() const;
};

int capacity_for(int branching) noexcept;

/// The capability tree T. Node ids are sequential ("n0" is the root) and
/// assigned in breadth-first order during construction.
class CapabilityTree {
 public:
  CapabilityTree() = default;
  explicit CapabilityTree(TreeConfig config);

  const TreeConfig& config() const noexcept { return config_; }
  const std::string& root_id() const noexcept { return root_; }
  const CategoryNode& root() const { return node(root_); }
  bool empty() const noexcept { return nodes_.empty(); }

  const CategoryNode& node(std::string_view id) const;  // NotFound
  const CategoryNode* find(std::string_view id) const;
  CategoryNode& mutable_node(std::string_view id);
  const std::map<std::string, CategoryNode, std::less<>>& nodes() const noexcept { return nodes_; }

  /// Allocates the next sequential id and stores the node under it.
  CategoryNode& add_node(CategoryNode node);
  void set_root(std::string id) { root_ = std::move(id); }

  /// Skill ids of every leaf reachable from `id`, in child order.
  std::vector<std::string> leaves_under(std::string_view id) const;
  std::size_t leaf_count() const;
  std::optional<std::string> leaf_of(std::string_view skill_id) const;
  /// Edges from root to the deepest leaf, counted in nodes.
  std::size_t depth() const;

  Json to_json() const;
  static CapabilityTree from_json(const Json& doc);
  void save(const std::filesystem::path& path) const;
  static CapabilityTree load(const std::filesystem::path& path);

  /// Nested view for display: {node_id, name, kind, size, children:[...]}.
  Json outline(std::string_view from, int max_depth = -1) const;

 private:
  TreeConfig config_;
  std::string root_;
  std::map<std::string, CategoryNode, std::less<>> nodes_;
  std::size_t next_id_ = 0;
};

struct Violation {
  std::string node_id;
  std::string rule;
  std::string detail;
};

Json to_json(const Violation& v);

/// Checks partition law, child disjointness, leaf singleton law, no
/// singleton categories, acyclicity/connectivity and global leaf coverage.
/// When `expected_skills` is given, the leaves must biject with it.
std::vector<Violation> validate_tree(const CapabilityTree& tree,
                                     const std::vector<std::string>* expected_skills = nullptr);

}  // namespace skillos::tree
