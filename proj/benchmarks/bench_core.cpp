#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "skillos/bradley_terry.hpp"
#include "skillos/categorizer.hpp"
#include "skillos/offline_policy.hpp"
#include "skillos/orchestrator.hpp"
#include "skillos/recipes.hpp"
#include "skillos/registry.hpp"

using namespace skillos;

namespace {

const char* const kWords[] = {"slide", "poster",  "chart",   "table", "audio",  "video", "invoice", "report",
                              "code",  "testing", "deploy",  "email", "resume", "query", "map",     "survey",
                              "pdf",   "ocr",     "summary", "blog",  "image",  "icon",  "budget",  "contract"};

std::vector<registry::Skill> make_skills(std::size_t n) {
  std::mt19937 rng(42);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  std::vector<registry::Skill> out;
  for (std::size_t i = 0; i < n; ++i) {
    registry::Skill s;
    s.id = "skill-" + std::to_string(i);
    s.name = std::string(kWords[pick(rng)]) + " " + kWords[pick(rng)];
    s.description = "Handles " + s.name + " with " + kWords[pick(rng)] + " and " + kWords[pick(rng)] + ".";
    out.push_back(std::move(s));
  }
  return out;
}

std::shared_ptr<llm::Gateway> offline() {
  auto embedder = std::make_shared<llm::HashingEmbedder>();
  auto backend = std::make_shared<llm::ScriptedBackend>();
  llm::OfflinePolicy(embedder).install(*backend);
  return std::make_shared<llm::Gateway>(backend, embedder);
}

bt::Matrix random_matrix(std::size_t n) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> cell(0, 20);
  bt::Matrix w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) w[i][j] = cell(rng);
    }
  }
  return w;
}

void BM_BradleyTerryFit(benchmark::State& state) {
  const auto w = random_matrix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bt::fit_bradley_terry(w));
}
BENCHMARK(BM_BradleyTerryFit)->Arg(4)->Arg(16)->Arg(64);

void BM_TreeBuild(benchmark::State& state) {
  const auto skills = make_skills(static_cast<std::size_t>(state.range(0)));
  const auto gw = offline();
  const auto cfg = tree::TreeConfig::from_branching(7);
  for (auto _ : state) benchmark::DoNotOptimize(tree::build_tree(skills, cfg, *gw));
}
BENCHMARK(BM_TreeBuild)->Arg(60)->Arg(300)->Unit(benchmark::kMillisecond);

std::vector<orchestrator::SubTask> random_dag(std::size_t n) {
  std::mt19937 rng(11);
  std::bernoulli_distribution edge(0.15);
  std::vector<orchestrator::SubTask> out;
  for (std::size_t i = 0; i < n; ++i) {
    orchestrator::SubTask t;
    t.sub_id = "n" + std::to_string(i);
    t.objective = "step";
    t.skill_id = "s";
    for (std::size_t j = 0; j < i; ++j) {
      if (edge(rng)) t.depends_on.push_back("n" + std::to_string(j));
    }
    out.push_back(std::move(t));
  }
  return out;
}

void BM_PlanLayering(benchmark::State& state) {
  const auto subs = random_dag(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto plan = orchestrator::build_plan(subs, orchestrator::Strategy::QualityFirst, "p");
    benchmark::DoNotOptimize(orchestrator::plan_metrics(plan));
  }
}
BENCHMARK(BM_PlanLayering)->Arg(20)->Arg(200);

void BM_DormantSuggestions(benchmark::State& state) {
  const auto skills = make_skills(static_cast<std::size_t>(state.range(0)));
  registry::Ecosystem eco;
  for (const auto& s : skills) eco.add(s);
  llm::HashingEmbedder embedder;
  const std::vector<std::string> active{skills.front().id};
  const auto index = registry::build_dormant_index(eco, active, embedder);
  for (auto _ : state) {
    benchmark::DoNotOptimize(registry::suggest_dormant(index, "make a poster with a chart and a summary", 5, embedder));
  }
}
BENCHMARK(BM_DormantSuggestions)->Arg(1000)->Arg(10000);

void BM_RecipeLookup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  llm::HashingEmbedder embedder;
  const auto plan = orchestrator::build_plan(random_dag(3), orchestrator::Strategy::SimplicityFirst, "p");
  std::vector<recipes::Recipe> pool;
  for (std::size_t i = 0; i < n; ++i) {
    recipes::Recipe r;
    r.recipe_id = "r" + std::to_string(i);
    r.task_embedding = embedder.embed(std::string(kWords[i % std::size(kWords)]) + " task " + std::to_string(i));
    r.plan = plan;
    pool.push_back(std::move(r));
  }
  const auto q = embedder.embed("poster task 17");
  for (auto _ : state) benchmark::DoNotOptimize(recipes::lookup_recipe(q, pool, 0.9));
}
BENCHMARK(BM_RecipeLookup)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
