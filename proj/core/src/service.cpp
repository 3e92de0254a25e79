#include "skillos/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "skillos/error.hpp"
#include "skillos/evaluation.hpp"
#include "skillos/orchestrator.hpp"
#include "skillos/session.hpp"

namespace skillos {

namespace {

struct TaskSession {
  std::mutex mu;
  SessionFlow flow;
  retrieval::TaskRequest request;
  std::optional<retrieval::Shortlist> shortlist;
  std::optional<recipes::RecipeMatch> offer;
  std::vector<std::string> selected;  // V
  std::vector<orchestrator::PlanOutcome> plans;
  std::optional<orchestrator::OrchestrationPlan> chosen;
  bool from_recipe = false;
  std::string run_id;

  TaskSession(std::string id, bool offered) : flow(std::move(id), offered) {}
};

struct RunRecord {
  std::mutex mu;
  std::condition_variable cv;
  std::string task_id;
  std::vector<Json> events;
  bool done = false;
  std::optional<executor::RunState> state;
  std::string error;
};

int status_for(Errc code) {
  switch (code) {
    case Errc::stage_violation:
    case Errc::invalid_config:
    case Errc::io: return 400;
    case Errc::not_found:
    case Errc::unknown_skill:
    case Errc::unknown_system: return 404;
    case Errc::conflict:
    case Errc::duplicate_id:
    case Errc::duplicate_skill: return 409;
    default: return 422;
  }
}

ServiceResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", std::string(code)}, {"message", message}}};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    if (end > i) out.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

std::vector<std::string> string_list(const Json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return {};
  if (!body[key].is_array()) throw Error(Errc::invalid_config, std::string("'") + key + "' must be an array of ids");
  std::vector<std::string> out;
  for (const auto& v : body[key]) {
    if (!v.is_string()) throw Error(Errc::invalid_config, std::string("'") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string required_string(const Json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string() || body[key].get<std::string>().empty()) {
    throw Error(Errc::invalid_config, std::string("request needs a non-empty string '") + key + "'");
  }
  return body[key].get<std::string>();
}

Json recipe_view(const recipes::Recipe& r) {
  return {{"recipe_id", r.recipe_id}, {"task_text", r.task_text}, {"created_at", r.created_at},
          {"use_count", r.use_count}, {"plan", r.plan.to_json()}};
}

Json plan_outcome_json(const orchestrator::PlanOutcome& o) {
  Json j = {{"strategy", std::string(orchestrator::to_string(o.strategy))}, {"warnings", o.warnings}};
  if (o.plan) {
    j["plan"] = o.plan->to_json();
    j["metrics"] = orchestrator::plan_metrics(*o.plan).to_json();
    j["error"] = nullptr;
  } else {
    j["plan"] = nullptr;
    j["metrics"] = nullptr;
    j["error"] = o.error;
  }
  return j;
}

}  // namespace

struct Service::Impl {
  std::shared_ptr<App> app;
  httplib::Server server;
  std::mutex mu;  // guards the maps and thread list
  std::map<std::string, std::shared_ptr<TaskSession>> tasks;
  std::map<std::string, std::shared_ptr<RunRecord>> runs;
  std::vector<Json> rankings;
  std::vector<std::thread> workers;
  std::atomic<std::uint64_t> counter{0};

  explicit Impl(std::shared_ptr<App> a) : app(std::move(a)) {}

  std::string next_id(std::string_view prefix, std::string_view seed) {
    const auto n = counter++;
    const auto stamp = std::chrono::system_clock::now().time_since_epoch().count();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%08llx",
                  static_cast<unsigned long long>(
                      fnv1a64(std::string(seed) + "|" + std::to_string(n) + "|" + std::to_string(stamp)) &
                      0xffffffffULL));
    return std::string(prefix) + std::to_string(n + 1) + "-" + buf;
  }

  std::shared_ptr<TaskSession> session(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = tasks.find(id);
    if (it == tasks.end()) throw Error(Errc::not_found, "unknown task '" + id + "'");
    return it->second;
  }

  std::shared_ptr<RunRecord> run_record(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = runs.find(id);
    if (it == runs.end()) throw Error(Errc::not_found, "unknown run '" + id + "'");
    return it->second;
  }

  Json session_view(TaskSession& s) {
    Json j = {{"task_id", s.flow.task_id()},
              {"task", s.request.description},
              {"stage", std::string(to_string(s.flow.stage()))},
              {"consent_pending", s.flow.consent_pending()}};
    j["shortlist"] = s.shortlist ? s.shortlist->to_json() : Json(nullptr);
    j["selected"] = s.selected;
    j["selected_plan"] = s.chosen ? Json(s.chosen->plan_id) : Json(nullptr);
    j["run_id"] = s.run_id.empty() ? Json(nullptr) : Json(s.run_id);
    return j;
  }

  void run_retrieval(TaskSession& s) {
    s.shortlist = retrieval::retrieve(app->tree(), app->dormant(), app->ecosystem(), s.request,
                                      app->retrieval_config(), app->gateway());
  }

  // GET /tree
  ServiceResponse get_tree(const std::map<std::string, std::string>& query) {
    const auto& t = app->tree();
    int depth = -1;
    if (const auto it = query.find("depth"); it != query.end()) {
      try {
        depth = std::stoi(it->second);
      } catch (const std::exception&) {
        throw Error(Errc::invalid_config, "depth must be an integer");
      }
    }
    return {200,
            {{"root_id", t.root_id()},
             {"branching_factor", t.config().branching},
             {"capacity", t.config().capacity},
             {"leaf_count", t.leaf_count()},
             {"depth", t.depth()},
             {"outline", t.outline(t.root_id(), depth)}}};
  }

  // GET /tree/{id}
  ServiceResponse get_tree_node(const std::string& id) {
    const auto& t = app->tree();
    const auto* n = t.find(id);
    if (!n) throw Error(Errc::not_found, "unknown tree node '" + id + "'");
    Json j = t.outline(id, 1);
    j["skill_ids"] = n->skill_ids;
    if (n->is_leaf() && !n->skill_ids.empty()) {
      if (const auto* s = app->ecosystem().find(n->skill_ids.front())) j["skill"] = registry::skill_card(*s);
    }
    return {200, j};
  }

  // GET /skills?q=
  ServiceResponse get_skills(const std::map<std::string, std::string>& query) {
    std::string q;
    if (const auto it = query.find("q"); it != query.end()) q = it->second;
    std::transform(q.begin(), q.end(), q.begin(), [](unsigned char c) { return std::tolower(c); });
    std::size_t limit = 50;
    if (const auto it = query.find("limit"); it != query.end()) limit = std::stoul(it->second);
    Json out = Json::array();
    for (const auto& [id, s] : app->ecosystem().skills()) {
      if (out.size() >= limit) break;
      std::string hay = s.id + " " + s.name + " " + s.description;
      std::transform(hay.begin(), hay.end(), hay.begin(), [](unsigned char c) { return std::tolower(c); });
      if (!q.empty() && hay.find(q) == std::string::npos) continue;
      out.push_back(registry::skill_card(s));
    }
    return {200, {{"skills", out}}};
  }

  // POST /retrieve
  ServiceResponse post_retrieve(const Json& body) {
    const auto text = required_string(body, "task");
    const auto added = string_list(body, "user_added_ids");
    for (const auto& id : added) app->ecosystem().at(id);
    const auto task_id = next_id("task-", text);
    auto request = retrieval::make_task(task_id, text, app->gateway(), added);
    auto offer = app->recipes().lookup(request.embedding, app->config().recipe_threshold);
    auto s = std::make_shared<TaskSession>(task_id, offer.has_value());
    s->request = std::move(request);
    s->offer = std::move(offer);
    std::lock_guard slock(s->mu);
    if (!s->offer) run_retrieval(*s);
    {
      std::lock_guard lock(mu);
      tasks[task_id] = s;
    }
    Json j = session_view(*s);
    if (s->offer) {
      j["recipe_hit"] = {{"recipe_id", s->offer->recipe.recipe_id},
                         {"similarity", s->offer->similarity},
                         {"task_text", s->offer->recipe.task_text},
                         {"plan", s->offer->recipe.plan.to_json()}};
    } else {
      j["recipe_hit"] = nullptr;
    }
    return {201, j};
  }

  // POST /runs/{task_id}/consent
  ServiceResponse post_consent(const std::string& task_id, const Json& body) {
    if (!body.contains("accept") || !body["accept"].is_boolean()) {
      throw Error(Errc::invalid_config, "consent needs a boolean 'accept'");
    }
    const bool accept = body["accept"].get<bool>();
    auto s = session(task_id);
    std::lock_guard lock(s->mu);
    s->flow.record_consent(accept);
    if (accept) {
      const auto recipe = app->recipes().apply(s->offer->recipe.recipe_id);
      s->chosen = recipe.plan;
      s->from_recipe = true;
      s->selected.clear();
      for (const auto& n : recipe.plan.nodes) {
        if (std::find(s->selected.begin(), s->selected.end(), n.sub_task.skill_id) == s->selected.end()) {
          s->selected.push_back(n.sub_task.skill_id);
        }
      }
    } else {
      run_retrieval(*s);
    }
    Json j = session_view(*s);
    j["consent"] = accept;
    if (accept) j["plan"] = s->chosen->to_json();
    return {200, j};
  }

  // POST /shortlist/{task_id}/confirm
  ServiceResponse post_confirm(const std::string& task_id, const Json& body) {
    auto s = session(task_id);
    std::lock_guard lock(s->mu);
    const auto add = string_list(body, "add");
    const auto remove = string_list(body, "remove");
    if (s->flow.stage() == Stage::retrieved && !s->flow.consent_pending()) {
      for (const auto& id : add) app->ecosystem().at(id);
    }
    s->flow.confirm_shortlist();
    auto list = *s->shortlist;
    std::erase_if(list.ranked, [&](const auto& e) {
      return std::find(remove.begin(), remove.end(), e.skill_id) != remove.end();
    });
    auto merged = add;
    for (const auto& id : s->request.user_added_ids) merged.push_back(id);
    s->shortlist = retrieval::finalize_selection(std::move(list), merged, app->ecosystem());
    s->selected = s->shortlist->ids();
    return {200, session_view(*s)};
  }

  // POST /plans
  ServiceResponse post_plans(const Json& body) {
    const auto task_id = required_string(body, "task_id");
    auto s = session(task_id);
    std::lock_guard lock(s->mu);
    if (s->flow.stage() != Stage::shortlist_confirmed) s->flow.plans_generated();  // throws with the right code
    if (s->selected.empty()) throw Error(Errc::empty_decomposition, "no skills selected for task " + task_id);
    std::vector<registry::Skill> skills;
    for (const auto& id : s->selected) skills.push_back(app->ecosystem().at(id));
    std::vector<orchestrator::Strategy> strategies(std::begin(orchestrator::kAllStrategies),
                                                   std::end(orchestrator::kAllStrategies));
    if (body.contains("strategies")) {
      strategies.clear();
      for (const auto& name : string_list(body, "strategies")) {
        const auto st = orchestrator::parse_strategy(name);
        if (!st) throw Error(Errc::invalid_config, "unknown strategy '" + name + "'");
        strategies.push_back(*st);
      }
    }
    s->plans = orchestrator::generate_plan_set(task_id, s->request.description, skills, app->gateway(), strategies);
    s->flow.plans_generated();
    Json plans = Json::array();
    for (const auto& o : s->plans) plans.push_back(plan_outcome_json(o));
    Json j = session_view(*s);
    j["plans"] = std::move(plans);
    return {200, j};
  }

  // POST /plans/{task_id}/select
  ServiceResponse post_select(const std::string& task_id, const Json& body) {
    const auto plan_id = required_string(body, "plan_id");
    auto s = session(task_id);
    std::lock_guard lock(s->mu);
    if (s->flow.stage() == Stage::plans_ready) {
      const auto it = std::find_if(s->plans.begin(), s->plans.end(),
                                   [&](const auto& o) { return o.plan && o.plan->plan_id == plan_id; });
      if (it == s->plans.end()) throw Error(Errc::not_found, "no valid plan '" + plan_id + "' for task " + task_id);
      s->flow.select_plan();
      s->chosen = *it->plan;
    } else {
      s->flow.select_plan();  // throws StageViolation or Conflict
    }
    Json j = session_view(*s);
    j["plan"] = s->chosen->to_json();
    return {200, j};
  }

  // POST /runs
  ServiceResponse post_runs(const Json& body) {
    const auto task_id = required_string(body, "task_id");
    auto s = session(task_id);
    std::lock_guard lock(s->mu);
    s->flow.start_run();
    const auto run_id = executor::make_run_id(s->chosen->plan_id);
    s->run_id = run_id;
    auto rec = std::make_shared<RunRecord>();
    rec->task_id = task_id;
    {
      std::lock_guard mlock(mu);
      runs[run_id] = rec;
      workers.emplace_back([this, s, rec, run_id] { execute(s, rec, run_id); });
    }
    return {202, {{"run_id", run_id}, {"task_id", task_id}, {"stage", std::string(to_string(Stage::running))}}};
  }

  void execute(std::shared_ptr<TaskSession> s, std::shared_ptr<RunRecord> rec, std::string run_id) {
    orchestrator::OrchestrationPlan plan;
    std::string task;
    bool from_recipe = false;
    {
      std::lock_guard lock(s->mu);
      plan = *s->chosen;
      task = s->request.description;
      from_recipe = s->from_recipe;
    }
    executor::RunOptions opts;
    opts.runs_root = app->config().runs_dir();
    opts.run_id = run_id;
    opts.max_parallel = app->config().executor.max_parallel;
    opts.on_event = [rec](const executor::RunEvent& e) {
      {
        std::lock_guard lock(rec->mu);
        rec->events.push_back(executor::to_json(e));
      }
      rec->cv.notify_all();
    };
    std::optional<executor::RunState> state;
    std::string error;
    try {
      state = executor::run_plan(plan, task, app->ecosystem(), app->executor_backend(), opts);
      if (state->overall == executor::RunOverall::succeeded && !from_recipe) {
        app->recipes().store(task, plan, app->gateway());
      }
    } catch (const std::exception& e) {
      error = e.what();
      spdlog::error("run {} aborted: {}", run_id, error);
    }
    {
      std::lock_guard lock(s->mu);
      s->flow.finish_run();
    }
    {
      std::lock_guard lock(rec->mu);
      rec->state = std::move(state);
      rec->error = error;
      if (!rec->state) {
        rec->events.push_back({{"run_id", run_id}, {"sub_id", nullptr}, {"status", "failed"}, {"ts", 0},
                               {"seq", rec->events.size()}});
      }
      rec->done = true;
    }
    rec->cv.notify_all();
  }

  // GET /runs/{id}
  ServiceResponse get_run(const std::string& run_id) {
    auto rec = run_record(run_id);
    std::lock_guard lock(rec->mu);
    if (rec->state) return {200, rec->state->to_json()};
    Json j = {{"run_id", run_id}, {"task_id", rec->task_id}, {"overall", rec->done ? "failed" : "running"},
              {"events", rec->events}};
    if (!rec->error.empty()) j["error"] = rec->error;
    return {200, j};
  }

  bool wait_events(const std::string& run_id, std::size_t from, std::vector<Json>& out, int timeout_ms) {
    auto rec = run_record(run_id);
    std::unique_lock lock(rec->mu);
    rec->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                     [&] { return rec->events.size() > from || rec->done; });
    for (std::size_t i = from; i < rec->events.size(); ++i) out.push_back(rec->events[i]);
    return !(rec->done && from + out.size() >= rec->events.size());
  }

  // GET /recipes
  ServiceResponse get_recipes() {
    Json list = Json::array();
    for (const auto& r : app->recipes().recipes()) list.push_back(recipe_view(r));
    return {200, {{"recipes", list}}};
  }

  // POST /rankings
  ServiceResponse post_rankings(const Json& body) {
    std::vector<std::pair<std::string, fs::path>> systems;
    if (!body.contains("systems") || !body["systems"].is_object() || body["systems"].size() < 2) {
      throw Error(Errc::invalid_config, "'systems' must map at least two system names to output directories");
    }
    for (const auto& [name, dir] : body["systems"].items()) {
      if (!dir.is_string()) throw Error(Errc::invalid_config, "system directory must be a string");
      systems.emplace_back(name, fs::path(dir.get<std::string>()));
    }
    if (!body.contains("tasks") || !body["tasks"].is_array() || body["tasks"].empty()) {
      throw Error(Errc::invalid_config, "'tasks' must be a non-empty array");
    }
    std::vector<eval::EvalTask> tasks;
    std::map<std::string, std::string> category_of;
    for (const auto& t : body["tasks"]) {
      tasks.push_back(eval::EvalTask::from_json(t));
      if (!tasks.back().category.empty()) category_of[tasks.back().task_id] = tasks.back().category;
    }
    const auto outcomes =
        eval::compare_systems(systems, tasks, app->gateway(), app->config().converters, app->config().render);
    std::vector<std::string> names;
    for (const auto& [n, d] : systems) names.push_back(n);
    const auto matrix = eval::aggregate(outcomes, names);
    bt::FitOptions fit;
    fit.alpha = app->config().bt_alpha;
    const auto scores = eval::rank(matrix, fit);

    const auto ranking_id = next_id("ranking-", body.dump());
    Json report = scores.to_json();
    report["ranking_id"] = ranking_id;
    report["win_matrix"] = matrix.to_json();
    report["outcome_count"] = outcomes.size();
    if (category_of.size() == tasks.size()) {
      Json per = Json::object();
      for (const auto& [cat, sc] : eval::per_category_scores(outcomes, category_of, names, fit)) {
        per[cat] = sc.to_json();
      }
      report["per_category"] = std::move(per);
    }
    const auto dir = app->config().rankings_dir() / ranking_id;
    eval::write_outcomes(dir / "outcomes.jsonl", outcomes);
    write_text_file(dir / "win_matrix.csv", matrix.to_csv());
    write_json_file(dir / "report.json", report);
    {
      std::lock_guard lock(mu);
      rankings.push_back(report);
    }
    return {201, report};
  }

  ServiceResponse get_rankings() {
    std::lock_guard lock(mu);
    return {200, {{"rankings", rankings}}};
  }

  ServiceResponse route(std::string_view method, std::string_view path, const Json& body,
                        const std::map<std::string, std::string>& query) {
    const auto seg = split_path(path);
    const auto n = seg.size();
    const bool get = method == "GET";
    const bool post = method == "POST";
    auto is = [&](std::size_t i, const char* s) { return i < n && seg[i] == s; };

    if (get && n == 1 && is(0, "health")) return {200, {{"status", "ok"}}};
    if (get && n == 1 && is(0, "tree")) return get_tree(query);
    if (get && n == 2 && is(0, "tree")) return get_tree_node(seg[1]);
    if (get && n == 1 && is(0, "skills")) return get_skills(query);
    if (post && n == 1 && is(0, "retrieve")) return post_retrieve(body);
    if (get && n == 2 && is(0, "tasks")) {
      auto s = session(seg[1]);
      std::lock_guard lock(s->mu);
      return {200, session_view(*s)};
    }
    if (post && n == 3 && is(0, "shortlist") && is(2, "confirm")) return post_confirm(seg[1], body);
    if (post && n == 1 && is(0, "plans")) return post_plans(body);
    if (post && n == 3 && is(0, "plans") && is(2, "select")) return post_select(seg[1], body);
    if (post && n == 1 && is(0, "runs")) return post_runs(body);
    if (get && n == 2 && is(0, "runs")) return get_run(seg[1]);
    if (post && n == 3 && is(0, "runs") && is(2, "consent")) return post_consent(seg[1], body);
    if (get && n == 1 && is(0, "recipes")) return get_recipes();
    if (get && n == 1 && is(0, "rankings")) return get_rankings();
    if (post && n == 1 && is(0, "rankings")) return post_rankings(body);
    return error_response(404, "NotFound", "no route for " + std::string(method) + " " + std::string(path));
  }
};

Service::Service(std::shared_ptr<App> app) : impl_(std::make_unique<Impl>(std::move(app))) {
  auto& svr = impl_->server;
  auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
    Json body = Json::object();
    if (!req.body.empty()) {
      body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        const auto r = error_response(400, "BadRequest", "request body is not valid JSON");
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
        return;
      }
    }
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto r = call(req.method, req.path, body, query);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
    spdlog::debug("{} {} -> {}", req.method, req.path, r.status);
  };
  svr.Get(R"(/runs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string run_id = req.matches[1];
    try {
      impl_->run_record(run_id);
    } catch (const Error& e) {
      const auto r = error_response(404, "NotFound", e.what());
      res.status = 404;
      res.set_content(r.body.dump(), "application/json");
      return;
    }
    auto cursor = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider("application/x-ndjson", [this, run_id, cursor](std::size_t, httplib::DataSink& sink) {
      std::vector<Json> batch;
      const bool more = wait_events(run_id, *cursor, batch, 250);
      for (const auto& e : batch) {
        const auto line = e.dump() + "\n";
        if (!sink.write(line.data(), line.size())) return false;
      }
      *cursor += batch.size();
      if (!more) sink.done();
      return true;
    });
  });
  svr.Get(".*", adapt);
  svr.Post(".*", adapt);
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    }
    res.status = 500;
    res.set_content(Json{{"error", "Internal"}, {"message", msg}}.dump(), "application/json");
  });
}

Service::~Service() {
  stop();
  wait_idle();
}

ServiceResponse Service::call(std::string_view method, std::string_view path, const Json& body,
                              const std::map<std::string, std::string>& query) {
  try {
    return impl_->route(method, path, body, query);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "BadRequest", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

bool Service::wait_events(std::string_view run_id, std::size_t from, std::vector<Json>& out, int timeout_ms) {
  return impl_->wait_events(std::string(run_id), from, out, timeout_ms);
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(Errc::io, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_idle() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mu);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

}  // namespace skillos
