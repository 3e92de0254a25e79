#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "criteria.hpp"
#include "skillos/categorizer.hpp"
#include "skillos/executor.hpp"
#include "skillos/orchestrator.hpp"
#include "skillos/retrieval.hpp"

namespace skillos::acceptance {

namespace {

namespace fs = std::filesystem;
using orchestrator::OrchestrationPlan;
using orchestrator::SubTask;

struct Dag {
  std::size_t n = 0;
  std::vector<std::set<std::size_t>> succ;
  std::vector<SubTask> tasks;  // shuffled
};

std::string node_name(std::size_t i) {
  return "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
}

Dag random_dag(std::mt19937_64& rng, std::size_t max_nodes, const std::vector<registry::Skill>& skills) {
  Dag d;
  d.n = std::uniform_int_distribution<std::size_t>(1, max_nodes)(rng);
  d.succ.resize(d.n);
  const double p = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
  std::bernoulli_distribution edge(p);
  // A random relabelling hides the generation order from the planner.
  std::vector<std::size_t> perm(d.n);
  for (std::size_t i = 0; i < d.n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t j = i + 1; j < d.n; ++j) {
      if (edge(rng)) d.succ[perm[i]].insert(perm[j]);
    }
  }
  for (std::size_t v = 0; v < d.n; ++v) {
    SubTask t;
    t.sub_id = node_name(v);
    t.objective = "objective " + t.sub_id;
    t.skill_id = skills[v % skills.size()].id;
    t.expected_outputs = {{"result_*.txt", "output of " + t.sub_id}};
    for (std::size_t u = 0; u < d.n; ++u) {
      if (d.succ[u].contains(v)) t.depends_on.push_back(node_name(u));
    }
    d.tasks.push_back(std::move(t));
  }
  std::shuffle(d.tasks.begin(), d.tasks.end(), rng);
  return d;
}

// Layer of every node = longest path (in edges) from any source, by
// enumerating every path.
std::vector<std::size_t> brute_layers(const Dag& d) {
  std::vector<std::size_t> layer(d.n, 0);
  std::vector<bool> has_pred(d.n, false);
  for (std::size_t u = 0; u < d.n; ++u) {
    for (const auto v : d.succ[u]) has_pred[v] = true;
  }
  std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t v, std::size_t depth) {
    layer[v] = std::max(layer[v], depth);
    for (const auto w : d.succ[v]) walk(w, depth + 1);
  };
  for (std::size_t s = 0; s < d.n; ++s) {
    if (!has_pred[s]) walk(s, 0);
  }
  return layer;
}

std::size_t index_of(const std::string& sub_id) { return std::stoul(sub_id.substr(1)); }

// DAG law checked from scratch: acyclic by position and ℓ(u) < ℓ(v).
std::string dag_law_problem(const OrchestrationPlan& plan) {
  std::map<std::string, std::size_t> pos;
  std::map<std::string, int> layer;
  for (std::size_t k = 0; k < plan.nodes.size(); ++k) {
    pos[plan.nodes[k].sub_task.sub_id] = k;
    layer[plan.nodes[k].sub_task.sub_id] = plan.nodes[k].layer;
  }
  for (const auto& [u, v] : plan.edges) {
    if (!pos.contains(u) || !pos.contains(v)) return "edge with unknown endpoint";
    if (pos[u] >= pos[v]) return "node order is not topological at " + u + " -> " + v;
    if (layer[u] >= layer[v]) return "layer not increasing on " + u + " -> " + v;
  }
  return {};
}

std::vector<registry::Skill> pool_skills() { return testing::synthetic_skills(40); }

}  // namespace

void criterion_dag_law(Check& c) {
  std::mt19937_64 rng(20);
  const auto skills = pool_skills();
  std::size_t edges = 0;
  std::size_t deepest = 0;
  for (int k = 0; k < 100; ++k) {
    const auto d = random_dag(rng, 20, skills);
    const auto plan = orchestrator::build_plan(d.tasks, orchestrator::Strategy::QualityFirst, "p");
    const auto where = "dag " + std::to_string(k) + ": ";
    const auto law = dag_law_problem(plan);
    c.require(law.empty(), where + law);
    c.require(orchestrator::validate_plan(plan).empty(), where + "validate_plan reports problems");

    const auto layers = brute_layers(d);
    std::size_t e = 0;
    for (const auto& s : d.succ) e += s.size();
    std::map<std::size_t, std::size_t> width;
    std::size_t top = 0;
    for (std::size_t v = 0; v < d.n; ++v) {
      ++width[layers[v]];
      top = std::max(top, layers[v]);
    }
    std::size_t widest = 0;
    for (const auto& [l, cnt] : width) widest = std::max(widest, cnt);
    const orchestrator::PlanMetrics expect{d.n, e, top + 1, widest};
    const auto got = orchestrator::plan_metrics(plan);
    c.require(got == expect, where + "metrics " + got.to_json().dump() + " != " + expect.to_json().dump());
    for (const auto& node : plan.nodes) {
      c.require(static_cast<std::size_t>(node.layer) == layers[index_of(node.sub_task.sub_id)],
                where + "layer of " + node.sub_task.sub_id);
    }
    edges += e;
    deepest = std::max(deepest, top + 1);
  }

  // Strategy shapes from the scripted decomposer, over real shortlists.
  const auto gw = testing::offline_gateway();
  const auto corpus = testing::synthetic_skills(60);
  registry::Ecosystem eco;
  for (const auto& s : corpus) eco.add(s);
  const auto t = tree::build_tree(corpus, tree::TreeConfig::from_branching(7), *gw);
  std::size_t plans = 0;
  for (const auto& pt : testing::planted_tasks(60)) {
    const auto req = retrieval::make_task(pt.task_id, pt.text, *gw);
    const auto sl = retrieval::retrieve(t, {}, eco, req, {8, 5}, *gw);
    const auto ids = sl.ids();
    for (std::size_t m = 1; m <= ids.size(); ++m) {
      std::vector<registry::Skill> selected;
      for (std::size_t k = 0; k < m; ++k) selected.push_back(eco.at(ids[k]));
      const auto set = orchestrator::generate_plan_set(pt.task_id, pt.text, selected, *gw);
      std::map<orchestrator::Strategy, orchestrator::PlanMetrics> metrics;
      for (const auto& o : set) {
        c.require(o.plan.has_value(), pt.task_id + ": strategy failed: " + o.error);
        if (!o.plan) continue;
        const auto law = dag_law_problem(*o.plan);
        c.require(law.empty(), pt.task_id + ": " + law);
        std::vector<std::string> allowed(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(m));
        c.require(orchestrator::validate_plan(*o.plan, &allowed).empty(), pt.task_id + ": invalid plan");
        metrics[o.strategy] = orchestrator::plan_metrics(*o.plan);
        ++plans;
      }
      using orchestrator::Strategy;
      c.require(metrics[Strategy::QualityFirst].node_count >= metrics[Strategy::SimplicityFirst].node_count,
                pt.task_id + ": quality plan smaller than simplicity plan");
      c.require(metrics[Strategy::EfficiencyFirst].max_width >= metrics[Strategy::SimplicityFirst].max_width,
                pt.task_id + ": efficiency plan narrower than simplicity plan");
    }
  }
  if (c.pass) c.detail << "100 random DAGs (" << edges << " edges, depth up to " << deepest
                       << ") match brute force; " << plans << " generated plans obey the law and strategy orderings";
}

namespace {

struct RunCheck {
  std::size_t overlaps = 0;
  std::size_t skipped = 0;
};

// Checks one finished run against the plan and the set of failing nodes.
void check_run(Check& c, const std::string& where, const OrchestrationPlan& plan, const executor::RunState& run,
               const std::set<std::string>& failing, const fs::path& runs_root, RunCheck& stats) {
  std::map<std::string, std::uint64_t> started;
  std::map<std::string, std::uint64_t> succeeded;
  std::map<std::string, std::int64_t> start_ts;
  std::map<std::string, std::int64_t> end_ts;
  std::int64_t last_ts = 0;
  for (const auto& e : run.events) {
    c.require(e.ts >= last_ts, where + "timestamps not monotone");
    last_ts = e.ts;
    if (e.sub_id.empty()) continue;
    if (e.status == "running") {
      started[e.sub_id] = e.seq;
      start_ts[e.sub_id] = e.ts;
    }
    if (e.status == "succeeded") succeeded[e.sub_id] = e.seq;
    if (e.status == "succeeded" || e.status == "failed") end_ts[e.sub_id] = e.ts;
  }
  c.require(!run.events.empty() && run.events.back().sub_id.empty(), where + "no terminal run event");

  for (const auto& node : plan.nodes) {
    const auto& id = node.sub_task.sub_id;
    if (!started.contains(id)) continue;
    for (const auto& p : plan.predecessors(id)) {
      c.require(succeeded.contains(p) && succeeded[p] < started[id], where + id + " started before " + p + " succeeded");
    }
  }

  // Exactly the transitive dependents of failing nodes are skipped.
  std::set<std::string> doomed;
  std::function<void(const std::string&)> mark = [&](const std::string& u) {
    for (const auto& v : plan.successors(u)) {
      if (doomed.insert(v).second) mark(v);
    }
  };
  for (const auto& f : failing) mark(f);
  for (const auto& node : plan.nodes) {
    const auto& id = node.sub_task.sub_id;
    const auto st = run.status.at(id);
    if (doomed.contains(id)) {
      c.require(st == executor::NodeStatus::skipped, where + id + " should be skipped");
    } else if (failing.contains(id)) {
      c.require(st == executor::NodeStatus::failed, where + id + " should have failed");
    } else {
      c.require(st == executor::NodeStatus::succeeded,
                where + id + " should have succeeded: " + run.summaries.at(id).reason);
    }
  }
  stats.skipped += doomed.size();

  // Same-layer nodes that both ran overlap in time.
  for (const auto& layer : executor::schedule_layers(plan)) {
    for (std::size_t a = 0; a < layer.size(); ++a) {
      for (std::size_t b = a + 1; b < layer.size(); ++b) {
        const auto &x = layer[a], &y = layer[b];
        if (!start_ts.contains(x) || !start_ts.contains(y)) continue;
        c.require(start_ts[x] < end_ts[y] && start_ts[y] < end_ts[x], where + x + " and " + y + " did not overlap");
        ++stats.overlaps;
      }
    }
  }

  const auto root = runs_root / run.run_id;
  for (const auto& [id, s] : run.summaries) {
    for (const auto& out : s.outputs) c.require(fs::is_regular_file(root / out), where + "missing artifact " + out);
  }
  for (const auto& a : run.artifacts) c.require(fs::is_regular_file(root / a.path), where + "missing " + a.path);
  c.require(fs::is_regular_file(root / "run.json"), where + "run.json not written");
  c.require(fs::is_regular_file(root / "events.jsonl"), where + "events.jsonl not written");
}

}  // namespace

void criterion_execution_order(Check& c) {
  testing::TempDir tmp("skillos-accept-exec");
  const auto skills = pool_skills();
  registry::Ecosystem eco;
  for (const auto& s : skills) eco.add(s);
  RunCheck stats;

  std::vector<SubTask> diamond;
  for (const auto& [id, deps] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"A", {}}, {"B", {"A"}}, {"C", {"A"}}, {"D", {"B", "C"}}}) {
    diamond.push_back({id, "do " + id, {{id + "_*.md", "notes"}}, deps, skills[diamond.size()].id});
  }
  const auto plan = orchestrator::build_plan(diamond, orchestrator::Strategy::QualityFirst, "diamond");
  executor::ScriptedExecutor slow(Json{{"default", "expected"}, {"sleep_ms", 150}});
  executor::RunOptions opt;
  opt.runs_root = tmp.path();
  opt.run_id = "diamond";
  const auto run = executor::run_plan(plan, "diamond task", eco, slow, opt);
  check_run(c, "diamond: ", plan, run, {}, tmp.path(), stats);
  c.require(run.overall == executor::RunOverall::succeeded, "diamond run did not succeed");

  std::mt19937_64 rng(8);
  std::size_t failures = 0;
  for (int k = 0; k < 10; ++k) {
    const auto d = random_dag(rng, 12, skills);
    const auto p = orchestrator::build_plan(d.tasks, orchestrator::Strategy::EfficiencyFirst, "r");
    std::set<std::string> failing;
    Json nodes = Json::object();
    const std::size_t n_fail = k % 3;  // 0, 1 or 2 failing nodes
    for (std::size_t f = 0; f < n_fail && f < d.n; ++f) {
      const auto id = node_name(std::uniform_int_distribution<std::size_t>(0, d.n - 1)(rng));
      failing.insert(id);
      nodes[id] = {{"fail", true}};
    }
    // A failing node that is itself downstream of another failure is skipped.
    std::set<std::string> reachable;
    std::function<void(const std::string&)> mark = [&](const std::string& u) {
      for (const auto& v : p.successors(u)) {
        if (reachable.insert(v).second) mark(v);
      }
    };
    for (const auto& f : failing) mark(f);
    std::set<std::string> effective;
    for (const auto& f : failing) {
      if (!reachable.contains(f)) effective.insert(f);
    }
    executor::ScriptedExecutor backend(Json{{"default", "expected"}, {"sleep_ms", 60}, {"nodes", nodes}});
    opt.run_id = "random-" + std::to_string(k);
    const auto r = executor::run_plan(p, "random task", eco, backend, opt);
    check_run(c, opt.run_id + ": ", p, r, effective, tmp.path(), stats);
    c.require((r.overall == executor::RunOverall::succeeded) == effective.empty(),
              opt.run_id + ": overall status wrong");
    failures += effective.size();
  }
  if (c.pass) c.detail << "diamond + 10 random runs: predecessors always first, " << stats.overlaps
                       << " same-layer pairs overlapped, " << failures << " failures skipped exactly "
                       << stats.skipped << " dependents, all artifacts present";
}

}  // namespace skillos::acceptance
