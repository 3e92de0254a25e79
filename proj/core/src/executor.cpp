#include "skillos/executor.hpp"

#include <fnmatch.h>
#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <semaphore>
#include <set>
#include <thread>

#include "skillos/error.hpp"
#include "skillos/vector_math.hpp"

namespace skillos::executor {

std::string_view to_string(NodeStatus s) noexcept {
  switch (s) {
    case NodeStatus::pending: return "pending";
    case NodeStatus::running: return "running";
    case NodeStatus::succeeded: return "succeeded";
    case NodeStatus::failed: return "failed";
    case NodeStatus::skipped: return "skipped";
  }
  return "pending";
}

std::optional<NodeStatus> parse_node_status(std::string_view s) noexcept {
  for (const auto v : {NodeStatus::pending, NodeStatus::running, NodeStatus::succeeded, NodeStatus::failed,
                       NodeStatus::skipped}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string_view to_string(RunOverall s) noexcept {
  switch (s) {
    case RunOverall::running: return "running";
    case RunOverall::succeeded: return "succeeded";
    case RunOverall::failed: return "failed";
  }
  return "running";
}

Json to_json(const Artifact& a) {
  return {{"producer", a.producer},
          {"path", a.path},
          {"kind", std::string(skillos::to_string(a.kind))},
          {"usage_hint", a.usage_hint}};
}

Artifact artifact_from_json(const Json& doc) {
  Artifact a;
  a.producer = doc.at("producer").get<std::string>();
  a.path = doc.at("path").get<std::string>();
  a.kind = parse_media_kind(doc.value("kind", std::string("other"))).value_or(MediaKind::other);
  a.usage_hint = doc.value("usage_hint", std::string());
  return a;
}

Json to_json(const NodeSummary& s) {
  return {{"sub_id", s.sub_id},
          {"status", std::string(to_string(s.status))},
          {"outputs", s.outputs},
          {"summary_text", s.summary_text},
          {"reason", s.reason}};
}

NodeSummary summary_from_json(const Json& doc) {
  NodeSummary s;
  s.sub_id = doc.at("sub_id").get<std::string>();
  s.status = parse_node_status(doc.at("status").get<std::string>()).value_or(NodeStatus::pending);
  s.outputs = doc.value("outputs", std::vector<std::string>{});
  s.summary_text = doc.value("summary_text", std::string());
  s.reason = doc.value("reason", std::string());
  return s;
}

Json to_json(const RunEvent& e) {
  return {{"run_id", e.run_id},
          {"sub_id", e.sub_id.empty() ? Json(nullptr) : Json(e.sub_id)},
          {"status", e.status},
          {"ts", e.ts},
          {"seq", e.seq}};
}

RunEvent event_from_json(const Json& doc) {
  RunEvent e;
  e.run_id = doc.at("run_id").get<std::string>();
  if (doc.contains("sub_id") && doc["sub_id"].is_string()) e.sub_id = doc["sub_id"].get<std::string>();
  e.status = doc.at("status").get<std::string>();
  e.ts = doc.at("ts").get<std::int64_t>();
  e.seq = doc.value("seq", std::uint64_t{0});
  return e;
}

Json RunState::to_json() const {
  Json st = Json::object();
  for (const auto& [id, s] : status) st[id] = std::string(executor::to_string(s));
  Json arts = Json::array();
  for (const auto& a : artifacts) arts.push_back(executor::to_json(a));
  Json sums = Json::object();
  for (const auto& [id, s] : summaries) sums[id] = executor::to_json(s);
  Json evs = Json::array();
  for (const auto& e : events) evs.push_back(executor::to_json(e));
  return {{"run_id", run_id},   {"task", task},         {"plan", plan.to_json()},
          {"status", st},       {"artifacts", arts},    {"summaries", sums},
          {"overall", std::string(executor::to_string(overall))}, {"events", evs}};
}

RunState RunState::from_json(const Json& doc) {
  RunState r;
  r.run_id = doc.at("run_id").get<std::string>();
  r.task = doc.value("task", std::string());
  r.plan = OrchestrationPlan::from_json(doc.at("plan"));
  for (const auto& [id, s] : doc.at("status").items()) {
    r.status[id] = parse_node_status(s.get<std::string>()).value_or(NodeStatus::pending);
  }
  for (const auto& a : doc.value("artifacts", Json::array())) r.artifacts.push_back(artifact_from_json(a));
  const auto sums = doc.value("summaries", Json::object());
  for (const auto& [id, s] : sums.items()) r.summaries[id] = summary_from_json(s);
  const auto overall = doc.value("overall", std::string("running"));
  r.overall = overall == "succeeded" ? RunOverall::succeeded
              : overall == "failed"  ? RunOverall::failed
                                     : RunOverall::running;
  for (const auto& e : doc.value("events", Json::array())) r.events.push_back(event_from_json(e));
  return r;
}

std::vector<std::vector<std::string>> schedule_layers(const OrchestrationPlan& plan) {
  std::map<int, std::vector<std::string>> by_layer;
  for (const auto& n : plan.nodes) by_layer[n.layer].push_back(n.sub_task.sub_id);
  std::vector<std::vector<std::string>> out;
  for (auto& [l, ids] : by_layer) out.push_back(std::move(ids));
  return out;
}

Json build_node_prompt(const RunState& run, std::string_view sub_id, const registry::Skill& skill,
                       const fs::path& run_root) {
  const auto* node = run.plan.find(sub_id);
  if (!node) throw Error(Errc::not_found, "no node '" + std::string(sub_id) + "' in plan " + run.plan.plan_id);
  const auto preds = run.plan.predecessors(sub_id);
  for (const auto& p : preds) {
    const auto it = run.status.find(p);
    if (it == run.status.end() || it->second != NodeStatus::succeeded) {
      throw Error(Errc::predecessor_not_succeeded,
                  "'" + std::string(sub_id) + "' waits on '" + p + "', which has not succeeded");
    }
  }
  const auto& st = node->sub_task;
  Json sections = Json::array();
  sections.push_back({{"kind", "task"}, {"text", run.task}});
  sections.push_back({{"kind", "skill"},
                      {"id", skill.id},
                      {"name", skill.name},
                      {"description", skill.description},
                      {"instructions", (skill.root_path / "SKILL.md").string()}});
  sections.push_back({{"kind", "objective"}, {"text", st.objective}});
  if (!preds.empty()) {
    Json items = Json::array();
    for (const auto& a : run.artifacts) {
      if (std::find(preds.begin(), preds.end(), a.producer) == preds.end()) continue;
      Json item = {{"producer", a.producer},
                   {"path", a.path},
                   {"kind", std::string(skillos::to_string(a.kind))},
                   {"usage_hint", a.usage_hint}};
      if (!run_root.empty()) item["location"] = (run_root / a.path).string();
      items.push_back(std::move(item));
    }
    sections.push_back({{"kind", "upstream_artifacts"},
                        {"text", "Files produced by earlier steps. Read them in place; do not modify them."},
                        {"items", std::move(items)}});
  }
  Json expected = Json::array();
  for (const auto& e : st.expected_outputs) expected.push_back({{"pattern", e.pattern}, {"purpose", e.purpose}});
  sections.push_back({{"kind", "expected_outputs"},
                      {"text", "Write these files into your working directory."},
                      {"items", std::move(expected)}});
  const auto succs = run.plan.successors(sub_id);
  if (!succs.empty()) {
    Json items = Json::array();
    for (const auto& s : succs) {
      const auto* d = run.plan.find(s);
      items.push_back({{"sub_id", s}, {"skill_id", d->sub_task.skill_id}, {"objective", d->sub_task.objective}});
    }
    sections.push_back({{"kind", "downstream"},
                        {"text", "These steps will read your outputs; name and describe files so they can be used "
                                 "without further explanation."},
                        {"items", std::move(items)}});
  }
  return {{"run_id", run.run_id}, {"sub_id", std::string(sub_id)}, {"sections", std::move(sections)}};
}

namespace {

/// Rejects absolute paths and any ".." component.
fs::path contained_path(const fs::path& workspace, const std::string& rel) {
  const fs::path p(rel);
  if (rel.empty() || p.is_absolute()) throw Error(Errc::backend_failure, "invalid output path '" + rel + "'");
  for (const auto& part : p) {
    if (part == "..") throw Error(Errc::backend_failure, "output path escapes workspace: '" + rel + "'");
  }
  return workspace / p;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(Errc::backend_failure, "cannot write " + path.string());
}

std::string concrete_name(const std::string& pattern) {
  std::string out;
  for (const char c : pattern) {
    if (c == '*') out += "output";
    else if (c == '?') out += 'x';
    else out += c;
  }
  return out;
}

const Json* section(const Json& prompt, std::string_view kind) {
  const auto it = prompt.find("sections");
  if (it == prompt.end() || !it->is_array()) return nullptr;
  for (const auto& s : *it) {
    if (s.value("kind", std::string()) == kind) return &s;
  }
  return nullptr;
}

void sleep_ms(const Json& j) {
  if (j.is_number() && j.get<double>() > 0) {
    std::this_thread::sleep_for(std::chrono::microseconds(static_cast<long long>(j.get<double>() * 1000)));
  }
}

bool matches(const std::string& pattern, const std::string& rel) {
  if (::fnmatch(pattern.c_str(), rel.c_str(), 0) == 0) return true;
  const auto base = fs::path(rel).filename().string();
  return ::fnmatch(pattern.c_str(), base.c_str(), 0) == 0;
}

}  // namespace

ScriptedExecutor::ScriptedExecutor(Json script) : script_(std::move(script)) {
  if (!script_.is_object()) throw Error(Errc::invalid_config, "executor script must be a JSON object");
}

BackendReport ScriptedExecutor::run(const NodeContext& ctx) {
  BackendReport report;
  const Json nodes = script_.value("nodes", Json::object());
  const auto it = nodes.find(ctx.sub_id);
  if (it != nodes.end()) {
    const auto& spec = *it;
    sleep_ms(spec.value("sleep_ms", script_.value("sleep_ms", Json(0))));
    for (const auto& f : spec.value("files", Json::array())) {
      const auto rel = f.at("path").get<std::string>();
      write_file(contained_path(ctx.workspace, rel), f.value("content", std::string()));
      if (f.contains("usage_hint")) report.usage_hints[rel] = f["usage_hint"].get<std::string>();
    }
    report.summary = spec.value("summary", "scripted " + ctx.sub_id);
    if (spec.value("fail", false)) {
      report.ok = false;
      if (!spec.contains("summary")) report.summary = "scripted failure of " + ctx.sub_id;
    }
    return report;
  }
  sleep_ms(script_.value("sleep_ms", Json(0)));
  if (script_.value("default", std::string("expected")) == "expected") {
    std::string task;
    if (const auto* t = section(ctx.prompt, "task")) task = t->value("text", std::string());
    if (const auto* e = section(ctx.prompt, "expected_outputs")) {
      for (const auto& item : e->value("items", Json::array())) {
        const auto rel = concrete_name(item.value("pattern", std::string("*.md")));
        write_file(contained_path(ctx.workspace, rel), "output of " + ctx.sub_id + " for: " + task + "\n");
        report.usage_hints[rel] = item.value("purpose", std::string());
      }
    }
  }
  report.summary = "scripted " + ctx.sub_id;
  return report;
}

GatewayExecutor::GatewayExecutor(std::shared_ptr<const llm::Gateway> gateway) : gateway_(std::move(gateway)) {}

BackendReport GatewayExecutor::run(const NodeContext& ctx) {
  Json doc;
  try {
    doc = gateway_->require(llm::RoleTag::node_execute, ctx.prompt);
  } catch (const Error& e) {
    throw Error(Errc::backend_failure, std::string(skillos::to_string(e.code())) + ": " + e.what());
  }
  BackendReport report;
  for (const auto& f : doc.value("files", Json::array())) {
    const auto rel = f.at("path").get<std::string>();
    write_file(contained_path(ctx.workspace, rel), f.at("content").get<std::string>());
    if (f.contains("usage_hint")) report.usage_hints[rel] = f["usage_hint"].get<std::string>();
  }
  report.ok = doc.at("status").get<std::string>() == "succeeded";
  report.summary = doc.at("summary").get<std::string>();
  return report;
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string expand_command(std::string_view templ, const std::map<std::string, std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < templ.size();) {
    if (templ[i] == '{') {
      const auto close = templ.find('}', i);
      if (close != std::string_view::npos) {
        const auto it = values.find(std::string(templ.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += shell_quote(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out += templ[i++];
  }
  return out;
}

CommandExecutor::CommandExecutor(std::string command_template) : template_(std::move(command_template)) {
  if (template_.empty()) throw Error(Errc::invalid_config, "empty executor command template");
}

BackendReport CommandExecutor::run(const NodeContext& ctx) {
  const auto prompt_path = ctx.run_root / ".prompts" / (ctx.sub_id + ".json");
  write_json_file(prompt_path, ctx.prompt);
  const auto cmd = "(" + expand_command(template_, {{"prompt", prompt_path.string()},
                                              {"workspace", ctx.workspace.string()},
                                              {"skill_dir", ctx.skill.root_path.string()},
                                              {"sub_id", ctx.sub_id},
                                              {"run_root", ctx.run_root.string()}}) +
                   ") 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(Errc::backend_failure, "cannot start agent command");
  std::string output;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  const int status = ::pclose(pipe);
  BackendReport report;
  report.ok = status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  constexpr std::size_t kTail = 2000;
  report.summary = output.size() > kTail ? output.substr(output.size() - kTail) : output;
  if (!report.ok && report.summary.empty()) report.summary = "agent command exited with status " + std::to_string(status);
  return report;
}

NodeResult execute_node(const Json& prompt, const registry::Skill& skill, ExecutorBackend& backend,
                        const orchestrator::PlanNode& node, const fs::path& run_root, std::string_view run_id) {
  const auto& st = node.sub_task;
  const auto workspace = run_root / st.sub_id;
  fs::create_directories(workspace);
  NodeResult result;
  result.summary.sub_id = st.sub_id;
  BackendReport report;
  try {
    report = backend.run({std::string(run_id), st.sub_id, prompt, skill, workspace, run_root});
  } catch (const std::exception& e) {
    report.ok = false;
    report.summary.clear();
    result.summary.reason = std::string("BackendFailure: ") + e.what();
  }

  std::vector<std::string> rels;
  for (const auto& entry : fs::recursive_directory_iterator(workspace)) {
    if (entry.is_regular_file()) rels.push_back(fs::relative(entry.path(), workspace).generic_string());
  }
  std::sort(rels.begin(), rels.end());
  for (const auto& rel : rels) {
    Artifact a;
    a.producer = st.sub_id;
    a.path = st.sub_id + "/" + rel;
    a.kind = classify_media(rel);
    if (const auto it = report.usage_hints.find(rel); it != report.usage_hints.end() && !it->second.empty()) {
      a.usage_hint = it->second;
    } else {
      for (const auto& e : st.expected_outputs) {
        if (matches(e.pattern, rel) && !e.purpose.empty()) {
          a.usage_hint = e.purpose;
          break;
        }
      }
      if (a.usage_hint.empty()) a.usage_hint = "output of " + st.sub_id;
    }
    result.summary.outputs.push_back(a.path);
    result.artifacts.push_back(std::move(a));
  }

  result.summary.summary_text = report.summary;
  if (!result.summary.reason.empty()) {
    result.summary.status = NodeStatus::failed;
  } else if (!report.ok) {
    result.summary.status = NodeStatus::failed;
    result.summary.reason = "BackendFailure: " + report.summary;
  } else {
    std::vector<std::string> missing;
    for (const auto& e : st.expected_outputs) {
      if (std::none_of(rels.begin(), rels.end(), [&](const auto& r) { return matches(e.pattern, r); })) {
        missing.push_back(e.pattern);
      }
    }
    if (missing.empty()) {
      result.summary.status = NodeStatus::succeeded;
    } else {
      result.summary.status = NodeStatus::failed;
      std::string msg = "ExpectedOutputMissing:";
      for (const auto& m : missing) msg += " " + m;
      result.summary.reason = msg;
    }
  }
  return result;
}

EventLog::EventLog(std::string run_id, fs::path file, Listener listener)
    : run_id_(std::move(run_id)),
      file_(std::move(file)),
      listener_(std::move(listener)),
      origin_wall_(std::chrono::system_clock::now()),
      origin_steady_(std::chrono::steady_clock::now()) {
  if (!file_.empty()) {
    fs::create_directories(file_.parent_path());
    std::ofstream(file_, std::ios::trunc);
  }
}

RunEvent EventLog::emit(std::string_view sub_id, std::string_view status) {
  std::lock_guard lock(mu_);
  using namespace std::chrono;
  const auto now = origin_wall_ + duration_cast<system_clock::duration>(steady_clock::now() - origin_steady_);
  RunEvent e{run_id_, std::string(sub_id), std::string(status),
             duration_cast<microseconds>(now.time_since_epoch()).count(), events_.size()};
  if (!events_.empty()) e.ts = std::max(e.ts, events_.back().ts);
  events_.push_back(e);
  if (!file_.empty()) append_jsonl(file_, to_json(e));
  if (listener_) listener_(e);
  return e;
}

std::vector<RunEvent> EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::string make_run_id(std::string_view seed) {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::system_clock::now().time_since_epoch().count();
  const auto h = fnv1a64(std::string(seed) + ":" + std::to_string(now) + ":" + std::to_string(counter++));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
  return "run-" + std::string(buf);
}

RunState run_plan(const OrchestrationPlan& plan, std::string_view task, const registry::Ecosystem& registry,
                  ExecutorBackend& backend, const RunOptions& options) {
  RunState state;
  state.run_id = options.run_id.empty() ? make_run_id(plan.plan_id) : options.run_id;
  state.task = std::string(task);
  state.plan = plan;
  for (const auto& n : plan.nodes) state.status[n.sub_task.sub_id] = NodeStatus::pending;

  const auto run_root = options.runs_root / state.run_id;
  fs::create_directories(run_root);
  EventLog log(state.run_id, run_root / "events.jsonl", options.on_event);
  std::mutex state_mu;

  const std::ptrdiff_t cap = options.max_parallel == 0 ? 1 << 20 : static_cast<std::ptrdiff_t>(options.max_parallel);
  std::counting_semaphore<1 << 20> slots(cap);

  for (const auto& layer : schedule_layers(plan)) {
    std::vector<std::thread> workers;
    for (const auto& sub_id : layer) {
      std::string blocker;
      for (const auto& p : plan.predecessors(sub_id)) {
        const auto s = state.status.at(p);
        if (s == NodeStatus::failed || s == NodeStatus::skipped) {
          blocker = p + " " + std::string(to_string(s));
          break;
        }
      }
      if (!blocker.empty()) {
        std::lock_guard lock(state_mu);
        state.status[sub_id] = NodeStatus::skipped;
        state.summaries[sub_id] = NodeSummary{sub_id, NodeStatus::skipped, {}, {}, "predecessor " + blocker};
        log.emit(sub_id, "skipped");
        continue;
      }
      workers.emplace_back([&, sub_id] {
        slots.acquire();
        const auto& node = *plan.find(sub_id);
        NodeResult result;
        try {
          const auto& skill = registry.at(node.sub_task.skill_id);
          Json prompt;
          {
            std::lock_guard lock(state_mu);
            prompt = build_node_prompt(state, sub_id, skill, run_root);
            state.status[sub_id] = NodeStatus::running;
            log.emit(sub_id, "running");
          }
          result = execute_node(prompt, skill, backend, node, run_root, state.run_id);
        } catch (const Error& e) {
          result.summary = NodeSummary{sub_id, NodeStatus::failed, {}, {},
                                       std::string(skillos::to_string(e.code())) + ": " + e.what()};
        } catch (const std::exception& e) {
          result.summary = NodeSummary{sub_id, NodeStatus::failed, {}, {}, std::string("BackendFailure: ") + e.what()};
        }
        {
          std::lock_guard lock(state_mu);
          if (state.status[sub_id] != NodeStatus::running) log.emit(sub_id, "running");
          state.status[sub_id] = result.summary.status;
          for (auto& a : result.artifacts) state.artifacts.push_back(std::move(a));
          state.summaries[sub_id] = result.summary;
          log.emit(sub_id, to_string(result.summary.status));
        }
        slots.release();
      });
    }
    for (auto& w : workers) w.join();
  }

  const bool all_ok = std::all_of(state.status.begin(), state.status.end(),
                                  [](const auto& kv) { return kv.second == NodeStatus::succeeded; });
  state.overall = all_ok ? RunOverall::succeeded : RunOverall::failed;
  log.emit("", to_string(state.overall));
  state.events = log.snapshot();
  write_json_file(run_root / "run.json", state.to_json());
  return state;
}

}  // namespace skillos::executor
