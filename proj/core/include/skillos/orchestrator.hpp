#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/registry.hpp"

namespace skillos::orchestrator {

enum class Strategy { QualityFirst, EfficiencyFirst, SimplicityFirst };

inline constexpr Strategy kAllStrategies[] = {Strategy::QualityFirst, Strategy::EfficiencyFirst,
                                              Strategy::SimplicityFirst};

std::string_view to_string(Strategy s) noexcept;
/// Accepts "QualityFirst" or the short CLI form "quality" (likewise for the others).
std::optional<Strategy> parse_strategy(std::string_view name) noexcept;
std::string_view short_name(Strategy s) noexcept;
/// Prompt charter describing the structural pattern the strategy asks for.
std::string_view charter(Strategy s) noexcept;

struct ExpectedOutput {
  std::string pattern;  // glob, e.g. "*.pdf"
  std::string purpose;
};

struct SubTask {
  std::string sub_id;
  std::string objective;
  std::vector<ExpectedOutput> expected_outputs;
  std::vector<std::string> depends_on;
  std::string skill_id;
};

struct PlanNode {
  SubTask sub_task;
  int layer = 0;
};

struct OrchestrationPlan {
  std::string plan_id;
  Strategy strategy = Strategy::SimplicityFirst;
  std::vector<PlanNode> nodes;  // topological order
  std::vector<std::pair<std::string, std::string>> edges;

  const PlanNode* find(std::string_view sub_id) const;
  std::vector<std::string> predecessors(std::string_view sub_id) const;
  std::vector<std::string> successors(std::string_view sub_id) const;

  Json to_json() const;
  static OrchestrationPlan from_json(const Json& doc);
};

struct Decomposition {
  std::vector<SubTask> sub_tasks;
  std::vector<std::string> warnings;
};

/// One decompose call. Sub-tasks bound to skills outside V are dropped
/// together with dependencies on them; an empty result is EmptyDecomposition.
Decomposition decompose(std::string_view task, std::span<const registry::Skill> selected, Strategy strategy,
                        const llm::Gateway& gateway);

/// Edges from depends_on, Kahn topological sort, longest-path layers.
/// Throws DuplicateSubTask, DanglingDependency or CyclicDependency (naming
/// one cycle).
OrchestrationPlan build_plan(std::vector<SubTask> sub_tasks, Strategy strategy, std::string plan_id);

/// Re-checks every plan invariant: acyclic, ℓ(u) < ℓ(v) on every edge,
/// longest-path layering, and (when given) skill ids within V.
std::vector<std::string> validate_plan(const OrchestrationPlan& plan,
                                       const std::vector<std::string>* allowed_skills = nullptr);

struct PlanOutcome {
  Strategy strategy;
  std::optional<OrchestrationPlan> plan;
  std::string error;  // set when plan is absent
  std::vector<std::string> warnings;
};

/// One plan per strategy; fails only when all three fail (NoValidPlan).
std::vector<PlanOutcome> generate_plan_set(std::string_view task_id, std::string_view task,
                                           std::span<const registry::Skill> selected,
                                           const llm::Gateway& gateway,
                                           std::span<const Strategy> strategies = kAllStrategies);

struct PlanMetrics {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t max_depth = 0;  // longest chain, in nodes
  std::size_t max_width = 0;  // largest layer

  Json to_json() const;
  bool operator==(const PlanMetrics&) const = default;
};

PlanMetrics plan_metrics(const OrchestrationPlan& plan);

}  // namespace skillos::orchestrator
