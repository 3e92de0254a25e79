#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/media.hpp"
#include "skillos/orchestrator.hpp"
#include "skillos/registry.hpp"

namespace skillos::executor {

namespace fs = std::filesystem;
using orchestrator::OrchestrationPlan;

enum class NodeStatus { pending, running, succeeded, failed, skipped };
enum class RunOverall { running, succeeded, failed };

std::string_view to_string(NodeStatus s) noexcept;
std::optional<NodeStatus> parse_node_status(std::string_view s) noexcept;
std::string_view to_string(RunOverall s) noexcept;

struct Artifact {
  std::string producer;
  std::string path;  // relative to the run root, "<sub_id>/<file>"
  MediaKind kind = MediaKind::other;
  std::string usage_hint;
};

Json to_json(const Artifact& a);
Artifact artifact_from_json(const Json& doc);

struct NodeSummary {
  std::string sub_id;
  NodeStatus status = NodeStatus::pending;
  std::vector<std::string> outputs;
  std::string summary_text;
  std::string reason;  // failure or skip cause
};

Json to_json(const NodeSummary& s);
NodeSummary summary_from_json(const Json& doc);

/// One state transition. sub_id empty marks the run-level terminal event.
struct RunEvent {
  std::string run_id;
  std::string sub_id;
  std::string status;
  std::int64_t ts = 0;  // microseconds since the Unix epoch, monotone within a run
  std::uint64_t seq = 0;
};

Json to_json(const RunEvent& e);
RunEvent event_from_json(const Json& doc);

struct RunState {
  std::string run_id;
  std::string task;
  OrchestrationPlan plan;
  std::map<std::string, NodeStatus> status;
  std::vector<Artifact> artifacts;
  std::map<std::string, NodeSummary> summaries;
  RunOverall overall = RunOverall::running;
  std::vector<RunEvent> events;

  Json to_json() const;
  static RunState from_json(const Json& doc);
};

/// Sub-id sets grouped by layer, ascending.
std::vector<std::vector<std::string>> schedule_layers(const OrchestrationPlan& plan);

/// Execution prompt for one node. Sections in order: task, skill, objective,
/// upstream_artifacts (omitted for sources), expected_outputs, downstream
/// (omitted for sinks). Throws PredecessorNotSucceeded.
Json build_node_prompt(const RunState& run, std::string_view sub_id, const registry::Skill& skill,
                       const fs::path& run_root = {});

struct NodeContext {
  std::string run_id;
  std::string sub_id;
  const Json& prompt;
  const registry::Skill& skill;
  fs::path workspace;  // the node's own directory, created before the call
  fs::path run_root;
};

struct BackendReport {
  bool ok = true;
  std::string summary;
  std::map<std::string, std::string> usage_hints;  // keyed by workspace-relative path
};

/// Runs one node. Implementations write outputs inside ctx.workspace and may
/// throw skillos::Error(BackendFailure).
class ExecutorBackend {
 public:
  virtual ~ExecutorBackend() = default;
  virtual BackendReport run(const NodeContext& ctx) = 0;
};

/// Writes declared files. Script document:
///   {"default": "expected" | "none", "sleep_ms": n,
///    "nodes": {"<sub_id>": {"files": [{"path", "content", "usage_hint"}],
///                            "sleep_ms": n, "fail": bool, "summary": str}}}
/// With default "expected", unscripted nodes write one file per expected
/// output pattern ('*' replaced by "output").
class ScriptedExecutor final : public ExecutorBackend {
 public:
  explicit ScriptedExecutor(Json script = Json::object());
  BackendReport run(const NodeContext& ctx) override;

 private:
  Json script_;
};

/// Sends the prompt through the gateway's node_execute role and writes the
/// returned files.
class GatewayExecutor final : public ExecutorBackend {
 public:
  explicit GatewayExecutor(std::shared_ptr<const llm::Gateway> gateway);
  BackendReport run(const NodeContext& ctx) override;

 private:
  std::shared_ptr<const llm::Gateway> gateway_;
};

/// Delegates to an external agent runtime. The template may use {prompt},
/// {workspace}, {skill_dir}, {sub_id} and {run_root}; the prompt is written
/// to <run_root>/.prompts/<sub_id>.json. Exit status 0 means success.
class CommandExecutor final : public ExecutorBackend {
 public:
  explicit CommandExecutor(std::string command_template);
  BackendReport run(const NodeContext& ctx) override;

 private:
  std::string template_;
};

/// Replaces each placeholder "{name}" with the shell-quoted value.
std::string expand_command(std::string_view templ, const std::map<std::string, std::string>& values);
std::string shell_quote(std::string_view s);

struct NodeResult {
  NodeSummary summary;
  std::vector<Artifact> artifacts;
};

/// Runs the backend, records every file in the workspace as an artifact and
/// fails the node when an expected pattern has no match.
NodeResult execute_node(const Json& prompt, const registry::Skill& skill, ExecutorBackend& backend,
                        const orchestrator::PlanNode& node, const fs::path& run_root, std::string_view run_id);

/// Serialized event channel; the only writer of RunState statuses.
class EventLog {
 public:
  using Listener = std::function<void(const RunEvent&)>;

  EventLog(std::string run_id, fs::path file, Listener listener = {});

  RunEvent emit(std::string_view sub_id, std::string_view status);
  std::vector<RunEvent> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::string run_id_;
  fs::path file_;
  Listener listener_;
  std::vector<RunEvent> events_;
  std::chrono::system_clock::time_point origin_wall_;
  std::chrono::steady_clock::time_point origin_steady_;
};

struct RunOptions {
  fs::path runs_root = "runs";
  std::string run_id;              // generated when empty
  std::size_t max_parallel = 0;    // per layer; 0 = unbounded
  EventLog::Listener on_event;
};

/// Executes layer by layer; same-layer nodes run concurrently. A failed node
/// skips its transitive dependents, independent nodes still run. Writes
/// runs/<run_id>/events.jsonl and run.json.
RunState run_plan(const OrchestrationPlan& plan, std::string_view task, const registry::Ecosystem& registry,
                  ExecutorBackend& backend, const RunOptions& options = {});

std::string make_run_id(std::string_view seed);

}  // namespace skillos::executor
