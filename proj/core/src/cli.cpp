#include "skillos/cli.hpp"

#include <CLI11.hpp>
#include <signal.h>

#include <functional>
#include <iostream>
#include <optional>
#include <thread>

#include "skillos/app.hpp"
#include "skillos/categorizer.hpp"
#include "skillos/error.hpp"
#include "skillos/evaluation.hpp"
#include "skillos/executor.hpp"
#include "skillos/orchestrator.hpp"
#include "skillos/retrieval.hpp"
#include "skillos/service.hpp"

namespace skillos {

namespace {

struct Common {
  std::string config;
  std::string workspace;
  std::string corpus;
  std::string ecosystem;
  std::string tree;
  std::string fixtures;
  bool strict = false;
  std::optional<int> branching;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> shortlist_size;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--workspace", c.workspace, "Workspace directory");
  cmd->add_option("--corpus", c.corpus, "Directory of skill folders");
  cmd->add_option("--ecosystem", c.ecosystem, "Ecosystem JSON file");
  cmd->add_option("--tree", c.tree, "Capability tree JSON file");
  cmd->add_option("--fixtures", c.fixtures, "Scripted gateway fixture file");
  cmd->add_flag("--strict", c.strict, "Scripted gateway without offline fallback");
  cmd->add_option("-B,--branching", c.branching, "Branching factor B");
  cmd->add_option("--top-k", c.top_k, "Active-set size K");
  cmd->add_option("-M,--shortlist-size", c.shortlist_size, "Shortlist size M");
}

Config make_config(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  cfg.apply_environment();
  if (!c.workspace.empty()) cfg.workspace = c.workspace;
  if (!c.corpus.empty()) cfg.corpus = c.corpus;
  if (!c.ecosystem.empty()) cfg.ecosystem = c.ecosystem;
  if (!c.tree.empty()) cfg.tree = c.tree;
  if (!c.fixtures.empty()) cfg.gateway.fixtures = c.fixtures;
  if (c.strict) cfg.gateway.strict = true;
  if (c.branching) {
    cfg.branching = *c.branching;
    cfg.capacity = tree::capacity_for(cfg.branching);
  }
  if (c.top_k) cfg.top_k = *c.top_k;
  if (c.shortlist_size) cfg.shortlist_size = *c.shortlist_size;
  cfg.validate();
  return cfg;
}

std::string task_text(const std::string& inline_text, const std::string& file) {
  if (!inline_text.empty() && !file.empty()) throw Error(Errc::invalid_config, "give --task or --task-file, not both");
  if (!file.empty()) {
    auto t = read_text_file(file);
    while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
    return t;
  }
  if (inline_text.empty()) throw Error(Errc::invalid_config, "a task is required (--task or --task-file)");
  return inline_text;
}

void print(std::ostream& out, const Json& doc) { out << doc.dump(2) << "\n"; }

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::size_t start = 0;
    while (start <= item.size()) {
      const auto comma = item.find(',', start);
      const auto end = comma == std::string::npos ? item.size() : comma;
      if (end > start) out.push_back(item.substr(start, end - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

int serve(App& app, const std::string& host, int port, std::ostream& out) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  app.prepare();
  auto shared = std::shared_ptr<App>(&app, [](App*) {});
  Service service(shared);
  const int bound = service.bind(host, port);
  out << Json{{"listening", host}, {"port", bound}}.dump() << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.listen();
  // listen() also returns on bind failure or stop from elsewhere; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  service.wait_idle();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"skillos: skill ecosystem navigation, orchestration and evaluation", "skillos"};
  cli.require_subcommand(1);
  std::function<int()> action;
  Common common;

  // tree
  auto* tree_cmd = cli.add_subcommand("tree", "Capability tree operations");
  tree_cmd->require_subcommand(1);

  std::string out_path;
  int parallelism = 1;
  auto* build = tree_cmd->add_subcommand("build", "Build the capability tree over the active set");
  add_common(build, common);
  build->add_option("--out", out_path, "Where to write the tree (default: config tree path)");
  build->add_option("--parallelism", parallelism, "Nodes of one level categorized concurrently")->check(CLI::PositiveNumber);
  build->callback([&] {
    action = [&] {
      App app(make_config(common));
      const auto skills = app.active_skills();
      tree::BuildOptions opts;
      opts.parallelism = parallelism;
      tree::BuildReport report;
      const auto t = tree::build_tree(skills, app.tree_config(), app.gateway(), opts, &report);
      const fs::path dest = out_path.empty() ? app.config().tree_path() : fs::path(out_path);
      t.save(dest);
      print(out, {{"tree", dest.string()},
                  {"nodes", t.nodes().size()},
                  {"leaves", t.leaf_count()},
                  {"depth", t.depth()},
                  {"degenerate_nodes", report.degenerate_nodes},
                  {"repaired_nodes", report.repaired_nodes}});
      return 0;
    };
  });

  std::string skill_dir;
  std::string skill_id;
  auto* insert = tree_cmd->add_subcommand("insert", "Insert one skill into an existing tree");
  add_common(insert, common);
  auto* skill_dir_opt = insert->add_option("--skill", skill_dir, "Skill folder to load and insert");
  insert->add_option("--skill-id", skill_id, "Id of an ecosystem skill to insert")->excludes(skill_dir_opt);
  insert->add_option("--out", out_path, "Where to write the updated tree (default: overwrite)");
  insert->callback([&] {
    action = [&] {
      App app(make_config(common));
      if (skill_dir.empty() == skill_id.empty()) throw Error(Errc::invalid_config, "give --skill or --skill-id");
      const auto path = app.config().tree_path();
      const auto t = tree::CapabilityTree::load(path);
      const auto skill = skill_dir.empty() ? app.ecosystem().at(skill_id) : registry::load_skill(skill_dir);
      const auto res = tree::insert_skill(t, skill, app.gateway());
      const fs::path dest = out_path.empty() ? path : fs::path(out_path);
      res.tree.save(dest);
      print(out, {{"tree", dest.string()}, {"leaf_id", res.leaf_id}, {"path", res.path},
                  {"leaves", res.tree.leaf_count()}});
      return 0;
    };
  });

  std::string tree_file;
  auto* validate = tree_cmd->add_subcommand("validate", "Check the tree invariants");
  validate->add_option("--tree", tree_file, "Tree JSON file")->required();
  validate->callback([&] {
    action = [&] {
      const auto t = tree::CapabilityTree::load(tree_file);
      Json list = Json::array();
      for (const auto& v : tree::validate_tree(t)) list.push_back(tree::to_json(v));
      print(out, {{"violations", list}});
      return list.empty() ? 0 : 1;
    };
  });

  std::string node_id;
  int depth = -1;
  auto* show = tree_cmd->add_subcommand("show", "Print the tree outline");
  show->add_option("--tree", tree_file, "Tree JSON file")->required();
  show->add_option("--node", node_id, "Start node (default: root)");
  show->add_option("--depth", depth, "Maximum depth (-1: all)");
  show->callback([&] {
    action = [&] {
      const auto t = tree::CapabilityTree::load(tree_file);
      print(out, t.outline(node_id.empty() ? t.root_id() : node_id, depth));
      return 0;
    };
  });

  // retrieve
  std::string task_inline;
  std::string task_file;
  std::vector<std::string> added;
  auto* retrieve = cli.add_subcommand("retrieve", "Tree-guided retrieval of a shortlist for a task");
  add_common(retrieve, common);
  retrieve->add_option("--task", task_inline, "Task text");
  retrieve->add_option("--task-file", task_file, "File holding the task text");
  retrieve->add_option("--add", added, "Skill id the user adds to the selection");
  retrieve->callback([&] {
    action = [&] {
      App app(make_config(common));
      const auto text = task_text(task_inline, task_file);
      for (const auto& id : added) app.ecosystem().at(id);
      const auto req = retrieval::make_task("cli", text, app.gateway(), added);
      auto list = retrieval::retrieve(app.tree(), app.dormant(), app.ecosystem(), req, app.retrieval_config(),
                                      app.gateway());
      list = retrieval::finalize_selection(std::move(list), added, app.ecosystem());
      print(out, list.to_json());
      return 0;
    };
  });

  // plan
  std::vector<std::string> skill_list;
  std::string shortlist_file;
  std::string strategy = "all";
  std::string task_id = "task";
  auto* plan = cli.add_subcommand("plan", "Generate orchestration plans over a selected skill set");
  add_common(plan, common);
  plan->add_option("--task", task_inline, "Task text");
  plan->add_option("--task-file", task_file, "File holding the task text");
  plan->add_option("--skills", skill_list, "Selected skill ids (comma separated or repeated)");
  plan->add_option("--shortlist", shortlist_file, "Shortlist JSON from `retrieve`");
  plan->add_option("--strategy", strategy, "all|quality|efficiency|simplicity")
      ->check(CLI::IsMember({"all", "quality", "efficiency", "simplicity", "QualityFirst", "EfficiencyFirst",
                             "SimplicityFirst"}));
  plan->add_option("--task-id", task_id, "Prefix for plan ids");
  plan->add_option("--out", out_path, "Also write the plan set to this file");
  plan->callback([&] {
    action = [&] {
      App app(make_config(common));
      const auto text = task_text(task_inline, task_file);
      auto ids = split_list(skill_list);
      if (!shortlist_file.empty()) {
        for (const auto& id : retrieval::Shortlist::from_json(read_json_file(shortlist_file)).ids()) ids.push_back(id);
      }
      if (ids.empty()) throw Error(Errc::invalid_config, "select skills with --skills or --shortlist");
      std::vector<registry::Skill> skills;
      for (const auto& id : ids) skills.push_back(app.ecosystem().at(id));
      std::vector<orchestrator::Strategy> strategies;
      if (strategy == "all") {
        strategies.assign(std::begin(orchestrator::kAllStrategies), std::end(orchestrator::kAllStrategies));
      } else {
        strategies.push_back(*orchestrator::parse_strategy(strategy));
      }
      const auto set = orchestrator::generate_plan_set(task_id, text, skills, app.gateway(), strategies);
      Json plans = Json::array();
      for (const auto& o : set) {
        Json j = {{"strategy", std::string(orchestrator::to_string(o.strategy))}, {"warnings", o.warnings}};
        j["plan"] = o.plan ? o.plan->to_json() : Json(nullptr);
        j["metrics"] = o.plan ? orchestrator::plan_metrics(*o.plan).to_json() : Json(nullptr);
        j["error"] = o.plan ? Json(nullptr) : Json(o.error);
        plans.push_back(std::move(j));
      }
      const Json doc = {{"task", text}, {"plans", plans}};
      if (!out_path.empty()) write_json_file(out_path, doc);
      print(out, doc);
      return 0;
    };
  });

  // run
  std::string plan_file;
  std::string runs_dir;
  auto* run = cli.add_subcommand("run", "Execute an orchestration plan");
  add_common(run, common);
  run->add_option("--plan", plan_file, "Plan JSON (a single plan, or a plan set with --strategy)")->required();
  run->add_option("--task", task_inline, "Task text (default: taken from a plan-set file)");
  run->add_option("--task-file", task_file, "File holding the task text");
  run->add_option("--strategy", strategy, "Plan to pick from a plan set");
  run->add_option("--runs-dir", runs_dir, "Run workspace root (default: <workspace>/runs)");
  run->callback([&] {
    action = [&] {
      App app(make_config(common));
      const auto doc = read_json_file(plan_file);
      orchestrator::OrchestrationPlan p;
      std::string text;
      if (doc.contains("plans")) {
        const auto want = strategy == "all" ? std::optional<orchestrator::Strategy>{} : orchestrator::parse_strategy(strategy);
        if (strategy != "all" && !want) throw Error(Errc::invalid_config, "unknown strategy '" + strategy + "'");
        bool found = false;
        for (const auto& entry : doc["plans"]) {
          if (entry["plan"].is_null()) continue;
          auto candidate = orchestrator::OrchestrationPlan::from_json(entry["plan"]);
          if (!want || candidate.strategy == *want) {
            p = std::move(candidate);
            found = true;
            break;
          }
        }
        if (!found) throw Error(Errc::not_found, "no matching plan in " + plan_file);
        text = doc.value("task", std::string());
      } else {
        p = orchestrator::OrchestrationPlan::from_json(doc);
      }
      if (!task_inline.empty() || !task_file.empty()) text = task_text(task_inline, task_file);
      if (text.empty()) throw Error(Errc::invalid_config, "a task is required (--task or --task-file)");
      const auto problems = orchestrator::validate_plan(p);
      if (!problems.empty()) throw Error(Errc::invalid_plan, "plan is invalid: " + problems.front());
      executor::RunOptions opts;
      opts.runs_root = runs_dir.empty() ? app.config().runs_dir() : fs::path(runs_dir);
      opts.max_parallel = app.config().executor.max_parallel;
      const auto state = executor::run_plan(p, text, app.ecosystem(), app.executor_backend(), opts);
      Json status = Json::object();
      for (const auto& [id, s] : state.status) status[id] = std::string(executor::to_string(s));
      print(out, {{"run_id", state.run_id},
                  {"overall", std::string(executor::to_string(state.overall))},
                  {"status", status},
                  {"run_dir", (opts.runs_root / state.run_id).string()}});
      return state.overall == executor::RunOverall::succeeded ? 0 : 1;
    };
  });

  // eval
  auto* eval_cmd = cli.add_subcommand("eval", "Pairwise judging and Bradley-Terry ranking");
  eval_cmd->require_subcommand(1);

  std::vector<std::string> system_specs;
  std::string tasks_file;
  auto* compare = eval_cmd->add_subcommand("compare", "Judge every system pair on every shared task");
  add_common(compare, common);
  compare->add_option("--system", system_specs, "name=dir, outputs in dir/<task_id>/")->required();
  compare->add_option("--tasks", tasks_file, "JSON array of {task_id, task, category}")->required();
  compare->add_option("--out", out_path, "outcomes.jsonl destination");
  compare->callback([&] {
    action = [&] {
      App app(make_config(common));
      std::vector<std::pair<std::string, fs::path>> systems;
      for (const auto& spec : system_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(Errc::invalid_config, "--system expects name=dir");
        systems.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      std::vector<eval::EvalTask> tasks;
      for (const auto& t : read_json_file(tasks_file)) tasks.push_back(eval::EvalTask::from_json(t));
      const auto outcomes =
          eval::compare_systems(systems, tasks, app.gateway(), app.config().converters, app.config().render);
      if (!out_path.empty()) eval::write_outcomes(out_path, outcomes);
      Json list = Json::array();
      for (const auto& o : outcomes) list.push_back(o.to_json());
      print(out, {{"outcomes", list}});
      return 0;
    };
  });

  std::string outcomes_file;
  std::vector<std::string> system_names;
  auto* aggregate = eval_cmd->add_subcommand("aggregate", "Build the win matrix from outcomes");
  aggregate->add_option("--outcomes", outcomes_file, "outcomes.jsonl")->required();
  aggregate->add_option("--systems", system_names, "System order (default: first appearance)");
  aggregate->add_option("--out", out_path, "CSV destination");
  aggregate->callback([&] {
    action = [&] {
      const auto outcomes = eval::read_outcomes(outcomes_file);
      auto names = split_list(system_names);
      if (names.empty()) {
        for (const auto& o : outcomes) {
          for (const auto& s : {o.system_i, o.system_j}) {
            if (std::find(names.begin(), names.end(), s) == names.end()) names.push_back(s);
          }
        }
      }
      const auto m = eval::aggregate(outcomes, names);
      if (!out_path.empty()) write_text_file(out_path, m.to_csv());
      print(out, m.to_json());
      return 0;
    };
  });

  std::string matrix_file;
  double alpha = 1.0;
  auto add_rank_options = [&](CLI::App* cmd) {
    auto* mat = cmd->add_option("--matrix", matrix_file, "Win matrix CSV");
    cmd->add_option("--outcomes", outcomes_file, "outcomes.jsonl (alternative to --matrix)")->excludes(mat);
    cmd->add_option("--tasks", tasks_file, "Task list with categories, for per-category scores");
    cmd->add_option("--systems", system_names, "System order when ranking outcomes");
    cmd->add_option("--alpha", alpha, "Laplace smoothing added to off-diagonal cells")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out_path, "Report destination");
    cmd->callback([&] {
      action = [&] {
        if (matrix_file.empty() == outcomes_file.empty()) throw Error(Errc::invalid_config, "give --matrix or --outcomes");
        bt::FitOptions fit;
        fit.alpha = alpha;
        Json report;
        if (!matrix_file.empty()) {
          report = eval::rank(eval::WinMatrix::from_csv(read_text_file(matrix_file)), fit).to_json();
        } else {
          const auto outcomes = eval::read_outcomes(outcomes_file);
          auto names = split_list(system_names);
          if (names.empty()) {
            for (const auto& o : outcomes) {
              for (const auto& s : {o.system_i, o.system_j}) {
                if (std::find(names.begin(), names.end(), s) == names.end()) names.push_back(s);
              }
            }
          }
          report = eval::rank(eval::aggregate(outcomes, names), fit).to_json();
          if (!tasks_file.empty()) {
            std::map<std::string, std::string> cats;
            for (const auto& t : read_json_file(tasks_file)) {
              const auto task = eval::EvalTask::from_json(t);
              cats[task.task_id] = task.category;
            }
            Json per = Json::object();
            for (const auto& [c, s] : eval::per_category_scores(outcomes, cats, names, fit)) per[c] = s.to_json();
            report["per_category"] = per;
          }
        }
        if (!out_path.empty()) write_json_file(out_path, report);
        print(out, report);
        return 0;
      };
    });
  };
  add_rank_options(eval_cmd->add_subcommand("rank", "Fit Bradley-Terry scores"));
  add_rank_options(cli.add_subcommand("rank", "Alias of `eval rank`"));

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = cli.add_subcommand("serve", "Run the HTTP service");
  add_common(serve_cmd, common);
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->callback([&] {
    action = [&] {
      App app(make_config(common));
      return serve(app, host, port, out);
    };
  });

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    cli.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << cli.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << cli.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto* sub = cli.get_subcommands().empty() ? &cli : cli.get_subcommands().front();
    err << sub->help();
    return 2;
  }
  if (!action) {
    err << cli.help();
    return 2;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace skillos
