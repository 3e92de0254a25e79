#include "skillos/tree.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "skillos/error.hpp"

namespace skillos::tree {

std::string_view to_string(NodeKind kind) noexcept {
  return kind == NodeKind::leaf ? "leaf" : "category";
}

int capacity_for(int branching) noexcept { return (3 * branching) / 2; }

TreeConfig TreeConfig::from_branching(int branching) {
  TreeConfig c{branching, capacity_for(branching)};
  c.validate();
  return c;
}

void TreeConfig::validate() const {
  if (branching < 4) throw Error(Errc::invalid_config, "branching factor B must be >= 4");
  if (capacity < 2) throw Error(Errc::invalid_config, "per-node capacity C must be >= 2");
}

CapabilityTree::CapabilityTree(TreeConfig config) : config_(config) {}

const CategoryNode* CapabilityTree::find(std::string_view id) const {
  const auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const CategoryNode& CapabilityTree::node(std::string_view id) const {
  if (const auto* n = find(id)) return *n;
  throw Error(Errc::not_found, "unknown tree node '" + std::string(id) + "'");
}

CategoryNode& CapabilityTree::mutable_node(std::string_view id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(Errc::not_found, "unknown tree node '" + std::string(id) + "'");
  return it->second;
}

CategoryNode& CapabilityTree::add_node(CategoryNode node) {
  node.node_id = "n" + std::to_string(next_id_++);
  auto id = node.node_id;
  auto [it, inserted] = nodes_.emplace(id, std::move(node));
  if (!inserted) throw Error(Errc::invalid_tree, "node id collision: " + id);
  return it->second;
}

std::vector<std::string> CapabilityTree::leaves_under(std::string_view id) const {
  std::vector<std::string> out;
  std::vector<const CategoryNode*> stack{&node(id)};
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    if (n->is_leaf()) {
      out.insert(out.end(), n->skill_ids.begin(), n->skill_ids.end());
      continue;
    }
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(&node(*it));
  }
  return out;
}

std::size_t CapabilityTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& kv) { return kv.second.is_leaf(); }));
}

std::optional<std::string> CapabilityTree::leaf_of(std::string_view skill_id) const {
  for (const auto& [id, n] : nodes_) {
    if (n.is_leaf() && n.skill_ids.size() == 1 && n.skill_ids.front() == skill_id) return id;
  }
  return std::nullopt;
}

std::size_t CapabilityTree::depth() const {
  if (empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<const CategoryNode*, std::size_t>> stack{{&root(), 1}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    for (const auto& c : n->children) stack.emplace_back(&node(c), d + 1);
  }
  return best;
}

Json CapabilityTree::to_json() const {
  Json nodes = Json::object();
  for (const auto& [id, n] : nodes_) {
    nodes[id] = {
        {"name", n.name},
        {"description", n.description},
        {"kind", std::string(tree::to_string(n.kind))},
        {"children", n.children},
        {"skill_ids", n.skill_ids},
    };
  }
  return {
      {"config", {{"B", config_.branching}, {"C", config_.capacity}}},
      {"root", root_},
      {"nodes", std::move(nodes)},
  };
}

CapabilityTree CapabilityTree::from_json(const Json& doc) {
  try {
    TreeConfig config{doc.at("config").at("B").get<int>(), doc.at("config").at("C").get<int>()};
    CapabilityTree tree(config);
    tree.root_ = doc.at("root").get<std::string>();
    std::size_t next = 0;
    for (const auto& [id, n] : doc.at("nodes").items()) {
      CategoryNode node;
      node.node_id = id;
      node.name = n.at("name").get<std::string>();
      node.description = n.value("description", std::string());
      node.kind = n.at("kind").get<std::string>() == "leaf" ? NodeKind::leaf : NodeKind::category;
      node.children = n.value("children", std::vector<std::string>{});
      node.skill_ids = n.value("skill_ids", std::vector<std::string>{});
      if (id.size() > 1 && id.front() == 'n' &&
          std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        next = std::max<std::size_t>(next, std::stoull(id.substr(1)) + 1);
      }
      tree.nodes_.emplace(id, std::move(node));
    }
    tree.next_id_ = std::max(next, tree.nodes_.size());
    return tree;
  } catch (const Json::exception& e) {
    throw Error(Errc::invalid_tree, std::string("malformed tree document: ") + e.what());
  }
}

void CapabilityTree::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

CapabilityTree CapabilityTree::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

Json CapabilityTree::outline(std::string_view from, int max_depth) const {
  const auto& n = node(from);
  Json out = {
      {"node_id", n.node_id},
      {"name", n.name},
      {"description", n.description},
      {"kind", std::string(tree::to_string(n.kind))},
      {"size", n.skill_ids.size()},
  };
  if (!n.children.empty()) {
    if (max_depth == 0) {
      out["child_count"] = n.children.size();
    } else {
      Json children = Json::array();
      for (const auto& c : n.children) children.push_back(outline(c, max_depth - 1));
      out["children"] = std::move(children);
    }
  }
  return out;
}

Json to_json(const Violation& v) {
  return {{"node_id", v.node_id}, {"rule", v.rule}, {"detail", v.detail}};
}

namespace {

std::string join(const std::vector<std::string>& ids, std::size_t max_items = 5) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < max_items; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > max_items) out += ", ...";
  return out;
}

}  // namespace

std::vector<Violation> validate_tree(const CapabilityTree& tree,
                                     const std::vector<std::string>* expected_skills) {
  std::vector<Violation> out;
  if (tree.empty()) {
    if (expected_skills && !expected_skills->empty()) {
      out.push_back({"", "leaf_coverage", "tree is empty"});
    }
    return out;
  }
  const auto* root = tree.find(tree.root_id());
  if (!root) {
    out.push_back({tree.root_id(), "structure", "root node missing"});
    return out;
  }

  // Reachability / acyclicity.
  std::unordered_set<std::string> visited;
  std::deque<const CategoryNode*> queue{root};
  visited.insert(root->node_id);
  while (!queue.empty()) {
    const auto* n = queue.front();
    queue.pop_front();
    for (const auto& c : n->children) {
      const auto* child = tree.find(c);
      if (!child) {
        out.push_back({n->node_id, "structure", "child '" + c + "' does not exist"});
        continue;
      }
      if (!visited.insert(c).second) {
        out.push_back({n->node_id, "structure", "child '" + c + "' reached twice (cycle or shared child)"});
        continue;
      }
      queue.push_back(child);
    }
  }
  for (const auto& [id, n] : tree.nodes()) {
    if (!visited.contains(id)) out.push_back({id, "structure", "node unreachable from root"});
  }

  std::vector<std::string> leaf_skills;
  for (const auto& [id, n] : tree.nodes()) {
    std::set<std::string> own(n.skill_ids.begin(), n.skill_ids.end());
    if (own.size() != n.skill_ids.size()) {
      out.push_back({id, "partition", "skill_ids contains duplicates"});
    }
    const bool singleton_shape = n.skill_ids.size() == 1 && n.children.empty();
    if (n.is_leaf() != singleton_shape) {
      out.push_back({id, "leaf_law",
                     n.is_leaf() ? "leaf must hold exactly one skill and no children"
                                 : "category with one skill and no children must be a leaf"});
    }
    if (n.is_leaf()) {
      leaf_skills.insert(leaf_skills.end(), n.skill_ids.begin(), n.skill_ids.end());
      continue;
    }
    if (id != tree.root_id() && n.skill_ids.size() == 1) {
      out.push_back({id, "singleton_category", "non-root category holds a single skill"});
    }
    if (n.children.empty()) {
      if (!n.skill_ids.empty()) {
        out.push_back({id, "partition", "category has skills but no children"});
      }
      continue;
    }
    std::map<std::string, int> counts;
    for (const auto& c : n.children) {
      const auto* child = tree.find(c);
      if (!child) continue;
      for (const auto& s : child->skill_ids) ++counts[s];
    }
    std::vector<std::string> duplicated, missing, extra;
    for (const auto& [s, k] : counts) {
      if (k > 1) duplicated.push_back(s);
      if (!own.contains(s)) extra.push_back(s);
    }
    for (const auto& s : own) {
      if (!counts.contains(s)) missing.push_back(s);
    }
    if (!duplicated.empty()) {
      out.push_back({id, "disjointness", "skills shared by several children: " + join(duplicated)});
    }
    if (!missing.empty()) {
      out.push_back({id, "partition", "skills not covered by any child: " + join(missing)});
    }
    if (!extra.empty()) {
      out.push_back({id, "partition", "children hold skills absent from the node: " + join(extra)});
    }
  }

  std::map<std::string, int> leaf_counts;
  for (const auto& s : leaf_skills) ++leaf_counts[s];
  std::vector<std::string> dup_leaves;
  for (const auto& [s, k] : leaf_counts) {
    if (k > 1) dup_leaves.push_back(s);
  }
  if (!dup_leaves.empty()) {
    out.push_back({"", "leaf_coverage", "skills with several leaves: " + join(dup_leaves)});
  }
  std::set<std::string> root_set(root->skill_ids.begin(), root->skill_ids.end());
  auto compare_with = [&](const std::set<std::string>& target, const char* label) {
    std::vector<std::string> missing, extra;
    for (const auto& s : target) {
      if (!leaf_counts.contains(s)) missing.push_back(s);
    }
    for (const auto& [s, k] : leaf_counts) {
      if (!target.contains(s)) extra.push_back(s);
    }
    if (!missing.empty()) {
      out.push_back({"", "leaf_coverage", std::string(label) + " skills without a leaf: " + join(missing)});
    }
    if (!extra.empty()) {
      out.push_back({"", "leaf_coverage", std::string("leaves outside ") + label + ": " + join(extra)});
    }
  };
  compare_with(root_set, "root");
  if (expected_skills) {
    compare_with(std::set<std::string>(expected_skills->begin(), expected_skills->end()), "active-set");
  }
  return out;
}

}  // namespace skillos::tree
