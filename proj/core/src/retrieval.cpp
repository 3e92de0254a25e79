#include "skillos/retrieval.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "skillos/error.hpp"

namespace skillos::retrieval {

using llm::RoleTag;

std::string_view to_string(Origin origin) noexcept {
  switch (origin) {
    case Origin::tree: return "tree";
    case Origin::dormant: return "dormant";
    case Origin::user: return "user";
  }
  return "tree";
}

namespace {

Origin parse_origin(const std::string& s) {
  if (s == "dormant") return Origin::dormant;
  if (s == "user") return Origin::user;
  return Origin::tree;
}

void push_unique(CandidateSet& set, std::unordered_set<std::string>& seen, Candidate c) {
  if (seen.insert(c.skill_id).second) set.push_back(std::move(c));
}

}  // namespace

TaskRequest make_task(std::string task_id, std::string description, const llm::Gateway& gateway,
                      std::vector<std::string> user_added_ids) {
  if (description.empty()) throw Error(Errc::invalid_config, "task description is empty");
  TaskRequest t;
  t.task_id = std::move(task_id);
  t.embedding = gateway.embed(description);
  t.description = std::move(description);
  t.user_added_ids = std::move(user_added_ids);
  return t;
}

CandidateSet traverse_retrieve(const tree::CapabilityTree& tree, const TaskRequest& task,
                               const llm::Gateway& gateway) {
  CandidateSet out;
  if (tree.empty()) return out;
  std::unordered_set<std::string> seen;
  std::vector<std::string> frontier{tree.root_id()};
  for (int depth = 0; !frontier.empty(); ++depth) {
    std::vector<std::string> options;
    for (const auto& f : frontier) {
      for (const auto& c : tree.node(f).children) {
        const auto& child = tree.node(c);
        if (child.is_leaf()) {
          push_unique(out, seen, {child.skill_ids.front(), Origin::tree});
        } else {
          options.push_back(c);
        }
      }
    }
    if (options.empty()) break;
    Json view = Json::array();
    for (std::size_t i = 0; i < options.size(); ++i) {
      const auto& n = tree.node(options[i]);
      view.push_back({{"index", i}, {"name", n.name}, {"description", n.description}});
    }
    Json payload = {{"task", task.description}, {"depth", depth}, {"options", std::move(view)}};
    const auto doc = gateway.require(RoleTag::tree_traversal, std::move(payload));
    std::vector<std::string> next;
    std::unordered_set<long long> picked;
    for (const auto& s : doc["selected"]) {
      const auto i = s.get<long long>();
      if (i < 0 || static_cast<std::size_t>(i) >= options.size() || !picked.insert(i).second) continue;
      next.push_back(options[static_cast<std::size_t>(i)]);
    }
    frontier = std::move(next);
  }
  return out;
}

CandidateSet augment_with_dormant(CandidateSet candidates, const TaskRequest& task,
                                  const registry::DormantIndex& index, std::size_t n,
                                  llm::Embedder& embedder) {
  if (index.empty() || n == 0) return candidates;
  std::unordered_set<std::string> seen;
  for (const auto& c : candidates) seen.insert(c.skill_id);
  for (const auto& s : registry::suggest_dormant(index, task.description, n, embedder)) {
    push_unique(candidates, seen, {s.skill_id, Origin::dormant});
  }
  return candidates;
}

std::vector<std::string> Shortlist::ids() const {
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& e : ranked) out.push_back(e.skill_id);
  return out;
}

bool Shortlist::contains(std::string_view id) const {
  return std::any_of(ranked.begin(), ranked.end(), [&](const auto& e) { return e.skill_id == id; });
}

Json Shortlist::to_json() const {
  Json items = Json::array();
  for (const auto& e : ranked) {
    items.push_back({{"id", e.skill_id},
                     {"rank", e.rank},
                     {"rationale", e.rationale},
                     {"origin", std::string(retrieval::to_string(e.origin))}});
  }
  return {{"ranked", std::move(items)}};
}

Shortlist Shortlist::from_json(const Json& doc) {
  Shortlist s;
  for (const auto& e : doc.at("ranked")) {
    s.ranked.push_back({e.at("id").get<std::string>(), e.value("rank", 0), e.value("rationale", std::string()),
                        parse_origin(e.value("origin", std::string("tree")))});
  }
  return s;
}

Shortlist prune_rank(const CandidateSet& candidates, const TaskRequest& task, std::size_t m,
                     const registry::Ecosystem& eco, const llm::Gateway& gateway) {
  if (m == 0) throw Error(Errc::invalid_config, "M must be at least 1");
  Shortlist out;
  if (candidates.empty()) return out;

  std::unordered_map<std::string, std::size_t> position;
  Json view = Json::array();
  for (const auto& c : candidates) {
    if (!position.emplace(c.skill_id, position.size()).second) continue;
    if (const auto* s = eco.find(c.skill_id)) {
      view.push_back(registry::skill_card(*s));
    } else {
      view.push_back({{"id", c.skill_id}, {"name", c.skill_id}, {"description", ""}});
    }
  }
  Json payload = {{"task", task.description}, {"m", m}, {"candidates", std::move(view)}};
  const auto doc = gateway.require(RoleTag::prune_rank, std::move(payload));

  struct Kept {
    std::string id;
    long long rank;
    std::size_t order;
    std::string rationale;
  };
  std::vector<Kept> kept;
  std::unordered_set<std::string> taken;
  for (const auto& item : doc["items"]) {
    const auto id = item["id"].get<std::string>();
    if (!position.contains(id) || !item["keep"].get<bool>() || !taken.insert(id).second) continue;
    kept.push_back({id, item["rank"].get<long long>(), kept.size(), item.value("rationale", std::string())});
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.order < b.order;
  });
  if (kept.size() > m) kept.resize(m);

  std::unordered_map<std::string, Origin> origin;
  for (const auto& c : candidates) origin.emplace(c.skill_id, c.origin);
  int rank = 1;
  for (auto& k : kept) out.ranked.push_back({k.id, rank++, std::move(k.rationale), origin[k.id]});
  return out;
}

Shortlist finalize_selection(Shortlist shortlist, std::span<const std::string> user_added_ids,
                             const registry::Ecosystem& eco) {
  for (const auto& id : user_added_ids) eco.at(id);
  int rank = static_cast<int>(shortlist.ranked.size()) + 1;
  for (const auto& id : user_added_ids) {
    if (shortlist.contains(id)) continue;
    shortlist.ranked.push_back({id, rank++, "added by user", Origin::user});
  }
  return shortlist;
}

Shortlist retrieve(const tree::CapabilityTree& tree, const registry::DormantIndex& index,
                   const registry::Ecosystem& eco, const TaskRequest& task,
                   const RetrievalConfig& config, const llm::Gateway& gateway) {
  auto candidates = traverse_retrieve(tree, task, gateway);
  candidates = augment_with_dormant(std::move(candidates), task, index, config.dormant_n, *gateway.embedder());
  return prune_rank(candidates, task, config.m, eco, gateway);
}

}  // namespace skillos::retrieval
