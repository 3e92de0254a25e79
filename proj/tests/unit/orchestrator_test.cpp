#include <gtest/gtest.h>

#include "corpus.hpp"
#include "role_override.hpp"
#include "skillos/error.hpp"
#include "skillos/orchestrator.hpp"

using namespace skillos;
using namespace skillos::orchestrator;
using skillos::llm::ChatResult;
using skillos::llm::RoleTag;

namespace {

SubTask st(std::string id, std::vector<std::string> deps, std::string skill = "s") {
  return {id, "do " + id, {{id + "_*.md", "notes"}}, std::move(deps), std::move(skill)};
}

std::vector<SubTask> diamond() { return {st("D", {"B", "C"}), st("B", {"A"}), st("A", {}), st("C", {"A"})}; }

Errc code_of(const std::function<void()>& fn, std::string* msg = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::io;
}

Json sub_task_json(const std::string& id, const std::string& skill, std::vector<std::string> deps) {
  return {{"sub_id", id}, {"objective", "o"}, {"skill_id", skill}, {"depends_on", deps},
          {"expected_outputs", {{{"pattern", id + ".md"}, {"purpose", "p"}}}}};
}

}  // namespace

TEST(Strategy, NamesAndCharters) {
  for (const auto s : kAllStrategies) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(parse_strategy(short_name(s)), s);
    EXPECT_FALSE(charter(s).empty());
  }
  EXPECT_EQ(parse_strategy("quality"), Strategy::QualityFirst);
  EXPECT_FALSE(parse_strategy("fastest").has_value());
  EXPECT_NE(charter(Strategy::QualityFirst), charter(Strategy::SimplicityFirst));
}

TEST(BuildPlan, DiamondLayersAndMetrics) {
  const auto p = build_plan(diamond(), Strategy::QualityFirst, "p1");
  ASSERT_EQ(p.nodes.size(), 4u);
  EXPECT_EQ(p.nodes[0].sub_task.sub_id, "A");
  EXPECT_EQ(p.nodes[0].layer, 0);
  EXPECT_EQ(p.find("B")->layer, 1);
  EXPECT_EQ(p.find("C")->layer, 1);
  EXPECT_EQ(p.find("D")->layer, 2);
  EXPECT_EQ(p.edges.size(), 4u);
  EXPECT_EQ(plan_metrics(p), (PlanMetrics{4, 4, 3, 2}));
  EXPECT_EQ(p.predecessors("D"), (std::vector<std::string>{"B", "C"}));
  EXPECT_EQ(p.successors("A").size(), 2u);
  EXPECT_TRUE(validate_plan(p).empty());
}

TEST(BuildPlan, LongestPathLayering) {
  // A -> B -> C and A -> C: C sits at layer 2, not 1.
  const auto p = build_plan({st("A", {}), st("B", {"A"}), st("C", {"A", "B"})}, Strategy::QualityFirst, "p");
  EXPECT_EQ(p.find("C")->layer, 2);
  EXPECT_EQ(plan_metrics(p), (PlanMetrics{3, 3, 3, 1}));
}

TEST(BuildPlan, DuplicateDependenciesCollapse) {
  const auto p = build_plan({st("A", {}), st("B", {"A", "A"})}, Strategy::QualityFirst, "p");
  EXPECT_EQ(p.edges.size(), 1u);
}

TEST(BuildPlan, RejectsBadGraphs) {
  EXPECT_EQ(code_of([] { build_plan({st("A", {}), st("A", {})}, Strategy::QualityFirst, "p"); }),
            Errc::duplicate_subtask);
  EXPECT_EQ(code_of([] { build_plan({st("A", {"A"})}, Strategy::QualityFirst, "p"); }), Errc::cyclic_dependency);
  EXPECT_EQ(code_of([] { build_plan({st("A", {"ghost"})}, Strategy::QualityFirst, "p"); }),
            Errc::dangling_dependency);
  std::string msg;
  EXPECT_EQ(code_of([] { build_plan({st("X", {}), st("A", {"B", "X"}), st("B", {"C"}), st("C", {"A"}), st("D", {"C"})},
                                    Strategy::QualityFirst, "p"); },
                    &msg),
            Errc::cyclic_dependency);
  // The named cycle visits exactly A, B and C.
  EXPECT_NE(msg.find("A"), std::string::npos);
  EXPECT_NE(msg.find("B"), std::string::npos);
  EXPECT_NE(msg.find("C"), std::string::npos);
  EXPECT_EQ(msg.find("D"), std::string::npos);
  EXPECT_EQ(msg.find("X"), std::string::npos);
}

TEST(ValidatePlan, CatchesCorruption) {
  auto p = build_plan(diamond(), Strategy::QualityFirst, "p");
  const std::vector<std::string> allowed{"s"};
  EXPECT_TRUE(validate_plan(p, &allowed).empty());
  const std::vector<std::string> other{"t"};
  EXPECT_FALSE(validate_plan(p, &other).empty());
  auto bumped = p;
  for (auto& n : bumped.nodes) {
    if (n.sub_task.sub_id == "D") n.layer = 1;
  }
  EXPECT_FALSE(validate_plan(bumped).empty());
  auto lifted = p;
  for (auto& n : lifted.nodes) {
    if (n.sub_task.sub_id == "D") n.layer = 5;
  }
  EXPECT_FALSE(validate_plan(lifted).empty());  // not longest-path
}

TEST(Plan, JsonRoundTripRebuildsDependencies) {
  const auto p = build_plan(diamond(), Strategy::EfficiencyFirst, "p9");
  const auto j = p.to_json();
  EXPECT_EQ(j["strategy"], "EfficiencyFirst");
  const auto back = OrchestrationPlan::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.find("D")->sub_task.depends_on.size(), 2u);
  EXPECT_THROW(OrchestrationPlan::from_json({{"plan_id", 3}}), Error);
}

TEST(Decompose, DropsSubTasksOutsideTheSelection) {
  auto og = skillos::testing::override_gateway();
  const auto skills = skillos::testing::synthetic_skills(2);
  og.backend->on(RoleTag::decompose, [&](const Json& p) {
    EXPECT_EQ(p["skills"].size(), 2u);
    EXPECT_TRUE(p["skills"][0].contains("root_path"));
    EXPECT_FALSE(p["charter"].get<std::string>().empty());
    return ChatResult::success({{"sub_tasks",
                                 {sub_task_json("a", skills[0].id, {}), sub_task_json("x", "outsider", {"a"}),
                                  sub_task_json("b", skills[1].id, {"a", "x"})}}});
  });
  const auto d = decompose("task", skills, Strategy::QualityFirst, *og.gateway);
  ASSERT_EQ(d.sub_tasks.size(), 2u);
  EXPECT_EQ(d.sub_tasks[1].depends_on, (std::vector<std::string>{"a"}));
  EXPECT_EQ(d.warnings.size(), 2u);
}

TEST(Decompose, EmptyResultIsAnError) {
  auto og = skillos::testing::override_gateway();
  og.backend->on(RoleTag::decompose, [](const Json&) {
    return ChatResult::success({{"sub_tasks", {sub_task_json("x", "outsider", {})}}});
  });
  const auto skills = skillos::testing::synthetic_skills(1);
  EXPECT_EQ(code_of([&] { decompose("t", skills, Strategy::QualityFirst, *og.gateway); }), Errc::empty_decomposition);
  EXPECT_EQ(code_of([&] { decompose("t", {}, Strategy::QualityFirst, *og.gateway); }), Errc::empty_decomposition);
}

TEST(PlanSet, OneFailingStrategyLeavesTheOthers) {
  auto og = skillos::testing::override_gateway();
  const auto skills = skillos::testing::synthetic_skills(3);
  og.backend->on(RoleTag::decompose, [&](const Json& p) {
    if (p["strategy"] == "QualityFirst") {
      return ChatResult::success({{"sub_tasks", {sub_task_json("a", skills[0].id, {"b"}),
                                                 sub_task_json("b", skills[1].id, {"a"})}}});
    }
    return ChatResult::success({{"sub_tasks", {sub_task_json("a", skills[0].id, {})}}});
  });
  const auto set = generate_plan_set("task-7", "t", skills, *og.gateway);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_FALSE(set[0].plan.has_value());
  EXPECT_EQ(set[0].error.rfind("CyclicDependency", 0), 0u) << set[0].error;
  ASSERT_TRUE(set[1].plan.has_value());
  EXPECT_EQ(set[1].plan->plan_id, "task-7-efficiency");
  EXPECT_EQ(set[2].plan->plan_id, "task-7-simplicity");
}

TEST(PlanSet, AllFailingIsNoValidPlan) {
  auto og = skillos::testing::override_gateway();
  og.backend->on(RoleTag::decompose, [](const Json&) { return ChatResult::failure(llm::ErrorKind::refusal, "no"); });
  const auto skills = skillos::testing::synthetic_skills(2);
  EXPECT_EQ(code_of([&] { generate_plan_set("t", "t", skills, *og.gateway); }), Errc::no_valid_plan);
}

TEST(PlanSet, OfflineShapesFollowTheirCharters) {
  const auto gw = skillos::testing::offline_gateway();
  const auto skills = skillos::testing::synthetic_skills(4);
  const auto set = generate_plan_set("t", "make a poster", skills, *gw);
  const auto q = plan_metrics(*set[0].plan);
  const auto e = plan_metrics(*set[1].plan);
  const auto s = plan_metrics(*set[2].plan);
  EXPECT_EQ(q, (PlanMetrics{6, 8, 3, 4}));
  EXPECT_EQ(e, (PlanMetrics{4, 3, 2, 3}));
  EXPECT_EQ(s, (PlanMetrics{4, 3, 4, 1}));
}

TEST(PlanMetrics, EmptyPlan) { EXPECT_EQ(plan_metrics(OrchestrationPlan{}), (PlanMetrics{0, 0, 0, 0})); }
