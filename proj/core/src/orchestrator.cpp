#include "skillos/orchestrator.hpp"

#include <algorithm>
#include <deque>
#include <future>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "skillos/error.hpp"

namespace skillos::orchestrator {

using llm::RoleTag;

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::QualityFirst: return "QualityFirst";
    case Strategy::EfficiencyFirst: return "EfficiencyFirst";
    case Strategy::SimplicityFirst: return "SimplicityFirst";
  }
  return "SimplicityFirst";
}

std::string_view short_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::QualityFirst: return "quality";
    case Strategy::EfficiencyFirst: return "efficiency";
    case Strategy::SimplicityFirst: return "simplicity";
  }
  return "simplicity";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
  for (const auto s : kAllStrategies) {
    if (name == to_string(s) || name == short_name(s)) return s;
  }
  return std::nullopt;
}

std::string_view charter(Strategy s) noexcept {
  switch (s) {
    case Strategy::QualityFirst:
      return "Quality first: aim for the best possible result in every deliverable. Let each skill "
             "work where it is strongest, and add preparation or review-and-polish stages whenever "
             "they make the final output better.";
    case Strategy::EfficiencyFirst:
      return "Efficiency first: finish with the fewest sequential hops. Arrange the graph so that "
             "sub-tasks without a real data dependency run side by side, and only join them where "
             "an output is genuinely needed downstream.";
    case Strategy::SimplicityFirst:
      return "Simplicity first: produce the smallest graph that still completes the task. Every "
             "node must be indispensable; if removing a node would not break the task, leave it "
             "out.";
  }
  return "";
}

const PlanNode* OrchestrationPlan::find(std::string_view sub_id) const {
  for (const auto& n : nodes) {
    if (n.sub_task.sub_id == sub_id) return &n;
  }
  return nullptr;
}

std::vector<std::string> OrchestrationPlan::predecessors(std::string_view sub_id) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges) {
    if (v == sub_id) out.push_back(u);
  }
  return out;
}

std::vector<std::string> OrchestrationPlan::successors(std::string_view sub_id) const {
  std::vector<std::string> out;
  for (const auto& [u, v] : edges) {
    if (u == sub_id) out.push_back(v);
  }
  return out;
}

Json OrchestrationPlan::to_json() const {
  Json jnodes = Json::array();
  for (const auto& n : nodes) {
    Json outputs = Json::array();
    for (const auto& e : n.sub_task.expected_outputs) {
      outputs.push_back({{"pattern", e.pattern}, {"purpose", e.purpose}});
    }
    jnodes.push_back({
        {"sub_id", n.sub_task.sub_id},
        {"skill_id", n.sub_task.skill_id},
        {"objective", n.sub_task.objective},
        {"expected_outputs", std::move(outputs)},
        {"layer", n.layer},
    });
  }
  Json jedges = Json::array();
  for (const auto& [u, v] : edges) jedges.push_back({u, v});
  return {{"plan_id", plan_id},
          {"strategy", std::string(orchestrator::to_string(strategy))},
          {"nodes", std::move(jnodes)},
          {"edges", std::move(jedges)}};
}

OrchestrationPlan OrchestrationPlan::from_json(const Json& doc) {
  try {
    OrchestrationPlan p;
    p.plan_id = doc.at("plan_id").get<std::string>();
    const auto strategy = parse_strategy(doc.at("strategy").get<std::string>());
    if (!strategy) throw Error(Errc::invalid_plan, "unknown strategy in plan document");
    p.strategy = *strategy;
    for (const auto& n : doc.at("nodes")) {
      PlanNode node;
      node.sub_task.sub_id = n.at("sub_id").get<std::string>();
      node.sub_task.skill_id = n.at("skill_id").get<std::string>();
      node.sub_task.objective = n.value("objective", std::string());
      for (const auto& e : n.value("expected_outputs", Json::array())) {
        node.sub_task.expected_outputs.push_back(
            {e.at("pattern").get<std::string>(), e.value("purpose", std::string())});
      }
      node.layer = n.at("layer").get<int>();
      p.nodes.push_back(std::move(node));
    }
    for (const auto& e : doc.at("edges")) {
      p.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    for (auto& n : p.nodes) n.sub_task.depends_on = p.predecessors(n.sub_task.sub_id);
    return p;
  } catch (const Json::exception& e) {
    throw Error(Errc::invalid_plan, std::string("malformed plan document: ") + e.what());
  }
}

Decomposition decompose(std::string_view task, std::span<const registry::Skill> selected, Strategy strategy,
                        const llm::Gateway& gateway) {
  if (selected.empty()) throw Error(Errc::empty_decomposition, "no skills selected");
  std::unordered_set<std::string> allowed;
  Json skill_view = Json::array();
  for (const auto& s : selected) {
    allowed.insert(s.id);
    auto card = registry::skill_card(s);
    card["root_path"] = s.root_path.string();
    skill_view.push_back(std::move(card));
  }
  Json payload = {
      {"task", std::string(task)},
      {"strategy", std::string(to_string(strategy))},
      {"charter", std::string(charter(strategy))},
      {"skills", std::move(skill_view)},
  };
  const auto doc = gateway.require(RoleTag::decompose, std::move(payload));

  Decomposition out;
  std::unordered_set<std::string> dropped;
  for (const auto& st : doc["sub_tasks"]) {
    SubTask t;
    t.sub_id = st["sub_id"].get<std::string>();
    t.objective = st["objective"].get<std::string>();
    t.skill_id = st["skill_id"].get<std::string>();
    t.depends_on = st["depends_on"].get<std::vector<std::string>>();
    for (const auto& e : st["expected_outputs"]) {
      t.expected_outputs.push_back({e["pattern"].get<std::string>(), e.value("purpose", std::string())});
    }
    if (!allowed.contains(t.skill_id)) {
      out.warnings.push_back("dropped sub-task '" + t.sub_id + "': skill '" + t.skill_id +
                             "' is not in the selected set");
      dropped.insert(t.sub_id);
      continue;
    }
    out.sub_tasks.push_back(std::move(t));
  }
  for (auto& t : out.sub_tasks) {
    auto& deps = t.depends_on;
    const auto before = deps.size();
    deps.erase(std::remove_if(deps.begin(), deps.end(), [&](const auto& d) { return dropped.contains(d); }),
               deps.end());
    if (deps.size() != before) {
      out.warnings.push_back("removed dependencies of '" + t.sub_id + "' on dropped sub-tasks");
    }
  }
  if (out.sub_tasks.empty()) {
    throw Error(Errc::empty_decomposition, std::string(to_string(strategy)) + " decomposition is empty");
  }
  return out;
}

namespace {

/// Names one cycle among the nodes left over by Kahn's algorithm.
std::string describe_cycle(const std::vector<SubTask>& tasks, const std::vector<int>& indegree,
                           const std::unordered_map<std::string, std::size_t>& index) {
  // Follow predecessor links inside the residual subgraph until a node repeats.
  std::size_t start = 0;
  while (start < tasks.size() && indegree[start] == 0) ++start;
  std::vector<std::size_t> walk;
  std::unordered_map<std::size_t, std::size_t> seen_at;
  std::size_t cur = start;
  while (!seen_at.contains(cur)) {
    seen_at[cur] = walk.size();
    walk.push_back(cur);
    std::size_t next = cur;
    for (const auto& d : tasks[cur].depends_on) {
      const auto j = index.at(d);
      if (indegree[j] > 0) {
        next = j;
        break;
      }
    }
    cur = next;
  }
  std::string out;
  for (auto i = walk.size(); i-- > seen_at[cur];) {
    out += tasks[walk[i]].sub_id + " -> ";
  }
  return out + tasks[cur].sub_id;
}

}  // namespace

OrchestrationPlan build_plan(std::vector<SubTask> sub_tasks, Strategy strategy, std::string plan_id) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < sub_tasks.size(); ++i) {
    if (!index.emplace(sub_tasks[i].sub_id, i).second) {
      throw Error(Errc::duplicate_subtask, "duplicate sub_id '" + sub_tasks[i].sub_id + "'");
    }
  }
  const auto n = sub_tasks.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<int> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& deps = sub_tasks[i].depends_on;
    std::vector<std::string> uniq;
    for (const auto& d : deps) {
      if (std::find(uniq.begin(), uniq.end(), d) == uniq.end()) uniq.push_back(d);
    }
    deps = std::move(uniq);
    for (const auto& d : deps) {
      if (d == sub_tasks[i].sub_id) {
        throw Error(Errc::cyclic_dependency, "cycle: " + d + " -> " + d);
      }
      const auto it = index.find(d);
      if (it == index.end()) {
        throw Error(Errc::dangling_dependency,
                    "'" + sub_tasks[i].sub_id + "' depends on unknown sub-task '" + d + "'");
      }
      succ[it->second].push_back(i);
      ++indegree[i];
    }
  }

  std::vector<int> remaining = indegree;
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (remaining[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  std::vector<int> layer(n, 0);
  while (!ready.empty()) {
    const auto u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (const auto v : succ[u]) {
      layer[v] = std::max(layer[v], layer[u] + 1);
      if (--remaining[v] == 0) ready.push_back(v);
    }
  }
  if (order.size() != n) {
    throw Error(Errc::cyclic_dependency, "cycle: " + describe_cycle(sub_tasks, remaining, index));
  }

  OrchestrationPlan plan;
  plan.plan_id = std::move(plan_id);
  plan.strategy = strategy;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return layer[a] < layer[b]; });
  for (const auto i : order) {
    for (const auto& d : sub_tasks[i].depends_on) plan.edges.emplace_back(d, sub_tasks[i].sub_id);
  }
  for (const auto i : order) plan.nodes.push_back({std::move(sub_tasks[i]), layer[i]});
  return plan;
}

std::vector<std::string> validate_plan(const OrchestrationPlan& plan,
                                       const std::vector<std::string>* allowed_skills) {
  std::vector<std::string> out;
  if (plan.nodes.empty()) out.push_back("plan has no nodes");
  std::unordered_map<std::string, int> layer;
  for (const auto& n : plan.nodes) {
    if (!layer.emplace(n.sub_task.sub_id, n.layer).second) {
      out.push_back("duplicate sub_id '" + n.sub_task.sub_id + "'");
    }
    if (n.layer < 0) out.push_back("negative layer on '" + n.sub_task.sub_id + "'");
    if (allowed_skills &&
        std::find(allowed_skills->begin(), allowed_skills->end(), n.sub_task.skill_id) == allowed_skills->end()) {
      out.push_back("'" + n.sub_task.sub_id + "' uses skill outside the selected set: " + n.sub_task.skill_id);
    }
  }
  std::unordered_map<std::string, int> max_pred_layer;
  for (const auto& [u, v] : plan.edges) {
    if (!layer.contains(u) || !layer.contains(v)) {
      out.push_back("edge references unknown node: " + u + " -> " + v);
      continue;
    }
    if (!(layer[u] < layer[v])) {
      out.push_back("layer order violated on edge " + u + " -> " + v);
    }
    auto [it, inserted] = max_pred_layer.emplace(v, layer[u]);
    if (!inserted) it->second = std::max(it->second, layer[u]);
  }
  for (const auto& n : plan.nodes) {
    const auto& id = n.sub_task.sub_id;
    const auto it = max_pred_layer.find(id);
    const int expected = it == max_pred_layer.end() ? 0 : it->second + 1;
    if (n.layer != expected) {
      out.push_back("'" + id + "' is at layer " + std::to_string(n.layer) + ", longest-path layer is " +
                    std::to_string(expected));
    }
  }
  return out;
}

std::vector<PlanOutcome> generate_plan_set(std::string_view task_id, std::string_view task,
                                           std::span<const registry::Skill> selected,
                                           const llm::Gateway& gateway, std::span<const Strategy> strategies) {
  if (selected.empty()) throw Error(Errc::empty_decomposition, "no skills selected");
  std::vector<std::future<PlanOutcome>> futures;
  for (const auto s : strategies) {
    futures.push_back(std::async(std::launch::async, [&, s] {
      PlanOutcome outcome{s, std::nullopt, {}, {}};
      try {
        auto d = decompose(task, selected, s, gateway);
        outcome.warnings = std::move(d.warnings);
        outcome.plan = build_plan(std::move(d.sub_tasks), s, std::string(task_id) + "-" + std::string(short_name(s)));
      } catch (const Error& e) {
        outcome.error = std::string(skillos::to_string(e.code())) + ": " + e.what();
      }
      return outcome;
    }));
  }
  std::vector<PlanOutcome> out;
  for (auto& f : futures) out.push_back(f.get());
  if (std::none_of(out.begin(), out.end(), [](const auto& o) { return o.plan.has_value(); })) {
    std::string msg = "every strategy failed:";
    for (const auto& o : out) msg += " [" + std::string(to_string(o.strategy)) + "] " + o.error;
    throw Error(Errc::no_valid_plan, msg);
  }
  return out;
}

Json PlanMetrics::to_json() const {
  return {{"node_count", node_count}, {"edge_count", edge_count}, {"max_depth", max_depth}, {"max_width", max_width}};
}

PlanMetrics plan_metrics(const OrchestrationPlan& plan) {
  PlanMetrics m;
  m.node_count = plan.nodes.size();
  m.edge_count = plan.edges.size();
  std::map<int, std::size_t> width;
  int max_layer = -1;
  for (const auto& n : plan.nodes) {
    ++width[n.layer];
    max_layer = std::max(max_layer, n.layer);
  }
  m.max_depth = static_cast<std::size_t>(max_layer + 1);
  for (const auto& [l, w] : width) m.max_width = std::max(m.max_width, w);
  return m;
}

}  // namespace skillos::orchestrator
