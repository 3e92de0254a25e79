#include "skillos/categorizer.hpp"

#include <algorithm>
#include <deque>
#include <future>
#include <optional>
#include <set>
#include <unordered_map>

#include "skillos/error.hpp"

namespace skillos::tree {

using llm::RoleTag;

namespace {

constexpr std::size_t kMaxMembersShown = 40;

Json node_view(const CategoryNode& node) {
  return {{"name", node.name}, {"description", node.description}};
}

Json cards(std::span<const std::string> ids, const SkillTable& skills) {
  Json out = Json::array();
  for (const auto& id : ids) {
    const auto it = skills.find(id);
    if (it == skills.end()) throw Error(Errc::unknown_skill, "skill '" + id + "' is not in the active set");
    out.push_back(registry::skill_card(it->second));
  }
  return out;
}

Json options_view(const std::vector<GroupSpec>& groups) {
  Json out = Json::array();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out.push_back({{"index", i}, {"name", groups[i].name}, {"description", groups[i].description}});
  }
  return out;
}

std::vector<GroupSpec> parse_groups(const Json& doc) {
  std::vector<GroupSpec> groups;
  for (const auto& g : doc.at("groups")) {
    groups.push_back({g.at("name").get<std::string>(), g.value("description", std::string())});
  }
  return groups;
}

std::string group_text(const GroupSpec& g) { return g.name + ": " + g.description; }

/// Index of the option with the highest cosine to `query`; lowest index wins ties.
std::size_t nearest(const Embedding& query, const std::vector<Embedding>& options) {
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const double sim = cosine(query, options[i]);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

/// Provisional membership used to size groups before assignment.
std::vector<std::vector<std::string>> provisional_members(const std::vector<GroupSpec>& groups,
                                                          std::span<const std::string> ids,
                                                          const SkillTable& skills,
                                                          const llm::Gateway& gateway) {
  std::vector<Embedding> group_vecs;
  for (const auto& g : groups) group_vecs.push_back(gateway.embed(group_text(g)));
  std::vector<std::vector<std::string>> members(groups.size());
  for (const auto& id : ids) {
    const auto v = gateway.embed(registry::embedding_text(skills.find(id)->second));
    members[nearest(v, group_vecs)].push_back(id);
  }
  return members;
}

void merge_smallest(std::vector<GroupSpec>& groups, std::vector<std::vector<std::string>>& members,
                    const llm::Gateway& gateway) {
  std::size_t small = 0;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (members[i].size() <= members[small].size()) small = i;
  }
  const auto small_vec = gateway.embed(group_text(groups[small]));
  std::size_t target = small == 0 ? 1 : 0;
  double best = -2.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i == small) continue;
    const double sim = cosine(small_vec, gateway.embed(group_text(groups[i])));
    if (sim > best) {
      best = sim;
      target = i;
    }
  }
  groups[target].description += "; also covers " + groups[small].name;
  members[target].insert(members[target].end(), members[small].begin(), members[small].end());
  groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(small));
  members.erase(members.begin() + static_cast<std::ptrdiff_t>(small));
}

Json refresh_payload(const std::string& reason, const std::string& name, const std::string& description,
                     const Json& members) {
  Json shown = Json::array();
  for (std::size_t i = 0; i < members.size() && i < kMaxMembersShown; ++i) shown.push_back(members[i]);
  return {
      {"reason", reason},
      {"category", {{"name", name}, {"description", description}}},
      {"members", std::move(shown)},
      {"member_count", members.size()},
  };
}

std::size_t choose_merge_target(const registry::Skill& skill, const std::vector<GroupSpec>& options,
                                const llm::Gateway& gateway) {
  Json payload = {
      {"purpose", "merge"},
      {"skill", registry::skill_card(skill)},
      {"options", options_view(options)},
  };
  const auto result = gateway.complete({RoleTag::category_descent, std::move(payload)});
  if (result.ok) {
    const auto choice = result.document["choice"].get<long long>();
    if (choice >= 0 && static_cast<std::size_t>(choice) < options.size()) {
      return static_cast<std::size_t>(choice);
    }
  }
  std::vector<Embedding> vecs;
  for (const auto& g : options) vecs.push_back(gateway.embed(group_text(g)));
  return nearest(gateway.embed(registry::embedding_text(skill)), vecs);
}

bool is_gateway_error(Errc code) {
  return code == Errc::transport || code == Errc::schema_violation || code == Errc::refusal ||
         code == Errc::fixture_miss;
}

}  // namespace

const std::vector<GroupSpec>& fixed_root_groups() {
  static const std::vector<GroupSpec> groups = {
      {"content creation",
       "Producing written content, documents, presentations, images, design, audio and video media."},
      {"data processing",
       "Transforming, analyzing, computing and visualizing data from datasets, spreadsheets and files."},
      {"software development",
       "Writing, testing, debugging, reviewing, building and deploying code and software projects."},
      {"automation",
       "Automating workflows, browsers, scheduled jobs, integrations, messaging and repetitive tasks."},
      {"domain-specific",
       "Specialized capabilities for particular fields such as finance, science, law, health and education."},
  };
  return groups;
}

GroupProposal discover_groups(const CategoryNode& node, bool is_root, const TreeConfig& config,
                              const SkillTable& skills, const llm::Gateway& gateway, int round) {
  GroupProposal proposal;
  proposal.target_min = config.min_groups();
  proposal.target_max = config.max_groups();
  if (is_root) {
    proposal.groups = fixed_root_groups();
    return proposal;
  }
  const Json skill_cards = cards(node.skill_ids, skills);
  auto request = [&](int attempt) {
    Json payload = {
        {"mode", "discover"},
        {"node", node_view(node)},
        {"skills", skill_cards},
        {"branching_factor", config.branching},
        {"target_min", proposal.target_min},
        {"target_max", proposal.target_max},
        {"attempt", attempt},
        {"round", round},
    };
    return parse_groups(gateway.require(RoleTag::group_discovery, std::move(payload)));
  };
  auto in_range = [&](std::size_t n) {
    return n >= static_cast<std::size_t>(proposal.target_min) &&
           n <= static_cast<std::size_t>(proposal.target_max);
  };

  proposal.groups = request(1);
  if (in_range(proposal.groups.size())) return proposal;
  proposal.groups = request(2);
  if (in_range(proposal.groups.size())) return proposal;

  proposal.repaired = true;
  auto& groups = proposal.groups;
  auto members = provisional_members(groups, node.skill_ids, skills, gateway);
  while (groups.size() > static_cast<std::size_t>(proposal.target_max)) {
    merge_smallest(groups, members, gateway);
  }
  for (int splits = 0; groups.size() < static_cast<std::size_t>(proposal.target_min) && splits < 16;
       ++splits) {
    std::size_t largest = 0;
    for (std::size_t i = 1; i < groups.size(); ++i) {
      if (members[i].size() > members[largest].size()) largest = i;
    }
    if (members[largest].size() < 2) break;
    Json payload = {
        {"mode", "split"},
        {"node", {{"name", groups[largest].name}, {"description", groups[largest].description}}},
        {"skills", cards(members[largest], skills)},
        {"branching_factor", config.branching},
        {"target_min", 2},
        {"target_max", 2},
        {"attempt", splits + 1},
        {"round", round},
    };
    auto parts = parse_groups(gateway.require(RoleTag::group_discovery, std::move(payload)));
    if (parts.size() < 2) break;
    const auto moved = members[largest];
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(largest));
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(largest));
    const auto part_members = provisional_members(parts, moved, skills, gateway);
    groups.insert(groups.end(), parts.begin(), parts.end());
    members.insert(members.end(), part_members.begin(), part_members.end());
    while (groups.size() > static_cast<std::size_t>(proposal.target_max)) {
      merge_smallest(groups, members, gateway);
    }
  }
  return proposal;
}

Assignment assign_skills(const CategoryNode& node, const GroupProposal& proposal,
                         std::span<const std::string> skill_ids, const SkillTable& skills,
                         const llm::Gateway& gateway, int pass, int round) {
  if (proposal.groups.empty()) throw Error(Errc::categorizer_failure, "empty group proposal");
  Json payload = {
      {"node", node_view(node)},
      {"groups", options_view(proposal.groups)},
      {"skills", cards(skill_ids, skills)},
      {"pass", pass},
      {"round", round},
  };
  const auto doc = gateway.require(RoleTag::skill_assignment, std::move(payload));
  const std::set<std::string, std::less<>> wanted(skill_ids.begin(), skill_ids.end());
  Assignment out;
  for (const auto& a : doc["assignments"]) {
    const auto id = a["skill_id"].get<std::string>();
    const auto g = a["group"].get<long long>();
    if (!wanted.contains(id) || out.group_of.contains(id)) continue;
    if (g < 0 || static_cast<std::size_t>(g) >= proposal.groups.size()) continue;
    out.group_of.emplace(id, static_cast<int>(g));
  }
  for (const auto& id : skill_ids) {
    if (!out.group_of.contains(id)) out.unassigned.push_back(id);
  }
  return out;
}

std::vector<ChildGroup> resolve_special_cases(const CategoryNode& node, const GroupProposal& proposal,
                                              const Assignment& assignment, const TreeConfig& config,
                                              const SkillTable& skills, const llm::Gateway& gateway,
                                              int round) {
  auto groups = proposal.groups;
  std::vector<std::vector<std::string>> members(groups.size());
  for (const auto& [id, g] : assignment.group_of) members[static_cast<std::size_t>(g)].push_back(id);

  std::vector<std::string> orphans;
  if (!assignment.unassigned.empty()) {
    const auto second = assign_skills(node, proposal, assignment.unassigned, skills, gateway, 2, round);
    for (const auto& [id, g] : second.group_of) members[static_cast<std::size_t>(g)].push_back(id);
    orphans = second.unassigned;
  }

  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (members[i].size() >= 2) survivors.push_back(i);
  }
  if (survivors.empty()) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (!members[i].empty()) {
        survivors.push_back(i);
        break;
      }
    }
  }
  std::set<std::size_t> touched;
  if (!survivors.empty()) {
    std::vector<GroupSpec> options;
    for (const auto i : survivors) options.push_back(groups[i]);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (members[g].size() != 1 || std::find(survivors.begin(), survivors.end(), g) != survivors.end()) {
        continue;
      }
      const auto& skill = skills.find(members[g].front())->second;
      const auto target = survivors[choose_merge_target(skill, options, gateway)];
      members[target].push_back(members[g].front());
      members[g].clear();
      touched.insert(target);
    }
  }

  if (!orphans.empty()) {
    std::size_t largest = 0;
    for (std::size_t i = 1; i < groups.size(); ++i) {
      if (members[i].size() > members[largest].size()) largest = i;
    }
    members[largest].insert(members[largest].end(), orphans.begin(), orphans.end());
  }

  for (const auto t : touched) {
    std::sort(members[t].begin(), members[t].end());
    auto doc = gateway.require(
        RoleTag::category_refresh,
        refresh_payload("merge", groups[t].name, groups[t].description, cards(members[t], skills)));
    groups[t].name = doc["name"].get<std::string>();
    groups[t].description = doc["description"].get<std::string>();
  }

  std::vector<ChildGroup> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (members[i].empty()) continue;
    std::sort(members[i].begin(), members[i].end());
    const bool recurse = members[i].size() >= static_cast<std::size_t>(config.capacity);
    out.push_back({groups[i].name, groups[i].description, std::move(members[i]), recurse});
  }
  return out;
}

namespace {

/// nullopt when the node stays in one group for two consecutive rounds.
std::optional<std::vector<ChildGroup>> categorize(const CategoryNode& node, bool is_root,
                                                  const TreeConfig& config, const SkillTable& skills,
                                                  const llm::Gateway& gateway, bool& repaired) {
  try {
    for (int round = 1; round <= 2; ++round) {
      const auto proposal = discover_groups(node, is_root, config, skills, gateway, round);
      repaired = repaired || proposal.repaired;
      const auto assignment = assign_skills(node, proposal, node.skill_ids, skills, gateway, 1, round);
      auto children = resolve_special_cases(node, proposal, assignment, config, skills, gateway, round);
      if (children.size() >= 2) return children;
    }
  } catch (const Error& e) {
    if (is_gateway_error(e.code())) {
      throw Error(Errc::categorizer_failure, "categorizing node " + node.node_id + ": " + e.what());
    }
    throw;
  }
  return std::nullopt;
}

void leafify(CapabilityTree& tree, const std::string& node_id, const SkillTable& skills) {
  const auto ids = tree.node(node_id).skill_ids;
  std::vector<std::string> children;
  for (const auto& id : ids) {
    const auto& s = skills.find(id)->second;
    CategoryNode leaf;
    leaf.name = s.name;
    leaf.description = s.description;
    leaf.skill_ids = {id};
    leaf.kind = NodeKind::leaf;
    children.push_back(tree.add_node(std::move(leaf)).node_id);
  }
  tree.mutable_node(node_id).children = std::move(children);
}

}  // namespace

CapabilityTree build_tree(std::span<const registry::Skill> active_skills, const TreeConfig& config,
                          const llm::Gateway& gateway, const BuildOptions& options, BuildReport* report) {
  config.validate();
  if (active_skills.empty()) throw Error(Errc::invalid_config, "cannot build a tree over no skills");
  SkillTable skills;
  for (const auto& s : active_skills) {
    if (!skills.emplace(s.id, s).second) throw Error(Errc::duplicate_id, "duplicate skill id '" + s.id + "'");
  }

  CapabilityTree tree(config);
  CategoryNode root;
  root.name = "root";
  root.description = "All active skills";
  for (const auto& [id, s] : skills) root.skill_ids.push_back(id);
  const auto root_id = tree.add_node(std::move(root)).node_id;
  tree.set_root(root_id);

  const auto capacity = static_cast<std::size_t>(config.capacity);
  const auto parallelism = static_cast<std::size_t>(std::max(1, options.parallelism));
  std::vector<std::string> level{root_id};
  while (!level.empty()) {
    std::vector<std::optional<std::vector<ChildGroup>>> results(level.size());
    std::vector<char> repaired(level.size(), 0);
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < level.size(); ++i) {
      if (tree.node(level[i]).skill_ids.size() >= capacity) work.push_back(i);
    }
    for (std::size_t start = 0; start < work.size(); start += parallelism) {
      const auto end = std::min(work.size(), start + parallelism);
      if (end - start == 1) {
        const auto i = work[start];
        bool rep = false;
        results[i] = categorize(tree.node(level[i]), level[i] == root_id, config, skills, gateway, rep);
        repaired[i] = rep;
        continue;
      }
      std::vector<std::future<void>> futures;
      for (auto w = start; w < end; ++w) {
        const auto i = work[w];
        futures.push_back(std::async(std::launch::async, [&, i] {
          bool rep = false;
          results[i] = categorize(tree.node(level[i]), level[i] == root_id, config, skills, gateway, rep);
          repaired[i] = rep;
        }));
      }
      for (auto& f : futures) f.get();
    }

    std::vector<std::string> next;
    for (std::size_t i = 0; i < level.size(); ++i) {
      const auto& id = level[i];
      if (repaired[i] && report) report->repaired_nodes.push_back(id);
      if (tree.node(id).skill_ids.size() < capacity) {
        leafify(tree, id, skills);
        continue;
      }
      if (!results[i]) {
        if (report) report->degenerate_nodes.push_back(id);
        leafify(tree, id, skills);
        continue;
      }
      std::vector<std::string> children;
      for (auto& g : *results[i]) {
        CategoryNode child;
        child.name = std::move(g.name);
        child.description = std::move(g.description);
        child.skill_ids = std::move(g.skill_ids);
        const auto child_id = tree.add_node(std::move(child)).node_id;
        children.push_back(child_id);
        next.push_back(child_id);
      }
      tree.mutable_node(id).children = std::move(children);
    }
    level = std::move(next);
  }
  return tree;
}

InsertResult insert_skill(const CapabilityTree& tree, const registry::Skill& skill,
                          const llm::Gateway& gateway) {
  if (tree.empty()) throw Error(Errc::invalid_tree, "cannot insert into an empty tree");
  const auto& root_ids = tree.root().skill_ids;
  if (std::binary_search(root_ids.begin(), root_ids.end(), skill.id) || tree.leaf_of(skill.id)) {
    throw Error(Errc::duplicate_skill, "skill '" + skill.id + "' is already in the tree");
  }

  InsertResult out{tree, {tree.root_id()}, {}};
  auto& t = out.tree;
  std::string cur = t.root_id();
  while (true) {
    const auto& n = t.node(cur);
    if (n.children.empty()) break;
    const bool leaf_bearing = std::any_of(n.children.begin(), n.children.end(),
                                          [&](const std::string& c) { return t.node(c).is_leaf(); });
    if (leaf_bearing) break;
    std::vector<GroupSpec> options;
    for (const auto& c : n.children) options.push_back({t.node(c).name, t.node(c).description});
    Json payload = {
        {"purpose", "insert"},
        {"skill", registry::skill_card(skill)},
        {"options", options_view(options)},
        {"depth", out.path.size()},
    };
    const auto doc = gateway.require(RoleTag::category_descent, std::move(payload));
    auto choice = doc["choice"].get<long long>();
    if (choice < 0 || static_cast<std::size_t>(choice) >= options.size()) {
      std::vector<Embedding> vecs;
      for (const auto& g : options) vecs.push_back(gateway.embed(group_text(g)));
      choice = static_cast<long long>(nearest(gateway.embed(registry::embedding_text(skill)), vecs));
    }
    cur = n.children[static_cast<std::size_t>(choice)];
    out.path.push_back(cur);
  }

  CategoryNode leaf;
  leaf.name = skill.name;
  leaf.description = skill.description;
  leaf.skill_ids = {skill.id};
  leaf.kind = NodeKind::leaf;
  out.leaf_id = t.add_node(std::move(leaf)).node_id;
  t.mutable_node(cur).children.push_back(out.leaf_id);
  for (const auto& p : out.path) {
    auto& ids = t.mutable_node(p).skill_ids;
    ids.insert(std::upper_bound(ids.begin(), ids.end(), skill.id), skill.id);
  }

  for (auto it = out.path.rbegin(); it != out.path.rend(); ++it) {
    if (*it == t.root_id()) continue;
    auto& n = t.mutable_node(*it);
    Json members = Json::array();
    for (const auto& c : n.children) {
      const auto& child = t.node(c);
      members.push_back({{"name", child.name}, {"description", child.description}});
    }
    auto payload = refresh_payload("insert", n.name, n.description, members);
    payload["new_skill"] = registry::skill_card(skill);
    const auto doc = gateway.require(RoleTag::category_refresh, std::move(payload));
    n.name = doc["name"].get<std::string>();
    n.description = doc["description"].get<std::string>();
  }
  return out;
}

}  // namespace skillos::tree
