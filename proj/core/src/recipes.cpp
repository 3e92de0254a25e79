#include "skillos/recipes.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include "skillos/error.hpp"

namespace skillos::recipes {

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Json Recipe::to_json() const {
  return {{"recipe_id", recipe_id},   {"task_text", task_text}, {"task_embedding", task_embedding},
          {"plan", plan.to_json()},   {"created_at", created_at}, {"use_count", use_count}};
}

Recipe Recipe::from_json(const Json& doc) {
  Recipe r;
  try {
    r.recipe_id = doc.at("recipe_id").get<std::string>();
    r.task_text = doc.at("task_text").get<std::string>();
    r.task_embedding = doc.at("task_embedding").get<Embedding>();
    r.plan = orchestrator::OrchestrationPlan::from_json(doc.at("plan"));
    r.created_at = doc.value("created_at", std::string());
    r.use_count = doc.value("use_count", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw Error(Errc::io, std::string("malformed recipe: ") + e.what());
  }
  if (std::abs(l2_norm(r.task_embedding) - 1.0) > 1e-6) {
    throw Error(Errc::io, "recipe " + r.recipe_id + " has a non-unit embedding");
  }
  return r;
}

std::optional<RecipeMatch> lookup_recipe(const Embedding& task_embedding, const std::vector<Recipe>& pool,
                                         double threshold) {
  const Recipe* best = nullptr;
  double best_sim = -2.0;
  for (const auto& r : pool) {
    if (r.task_embedding.size() != task_embedding.size()) continue;
    const double sim = cosine(task_embedding, r.task_embedding);
    if (sim > best_sim) {
      best_sim = sim;
      best = &r;
    }
  }
  if (!best || best_sim < threshold) return std::nullopt;
  return RecipeMatch{*best, best_sim};
}

RecipePool::RecipePool(std::filesystem::path file) : file_(std::move(file)) {
  if (std::filesystem::exists(file_)) {
    for (const auto& doc : read_jsonl_file(file_)) recipes_.push_back(Recipe::from_json(doc));
  }
}

Recipe RecipePool::store(std::string_view task_text, const orchestrator::OrchestrationPlan& plan,
                         const llm::Gateway& gateway) {
  if (!orchestrator::validate_plan(plan).empty()) throw Error(Errc::invalid_plan, "refusing to store an invalid plan");
  Recipe r;
  r.task_text = std::string(task_text);
  r.task_embedding = gateway.embed(task_text);
  r.plan = plan;
  r.created_at = now_iso();
  std::lock_guard lock(mu_);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%012llx",
                static_cast<unsigned long long>(fnv1a64(r.task_text + "#" + std::to_string(recipes_.size()) + "#" +
                                                        r.created_at) &
                                                0xffffffffffffULL));
  r.recipe_id = "recipe-" + std::string(buf);
  recipes_.push_back(r);
  if (!file_.empty()) append_jsonl(file_, r.to_json());
  return r;
}

void RecipePool::insert(Recipe recipe) {
  std::lock_guard lock(mu_);
  recipes_.push_back(std::move(recipe));
  if (!file_.empty()) append_jsonl(file_, recipes_.back().to_json());
}

std::optional<RecipeMatch> RecipePool::lookup(std::string_view task_text, const llm::Gateway& gateway,
                                              double threshold) const {
  return lookup(gateway.embed(task_text), threshold);
}

std::optional<RecipeMatch> RecipePool::lookup(const Embedding& task_embedding, double threshold) const {
  std::lock_guard lock(mu_);
  return lookup_recipe(task_embedding, recipes_, threshold);
}

Recipe RecipePool::apply(std::string_view recipe_id) {
  std::lock_guard lock(mu_);
  for (auto& r : recipes_) {
    if (r.recipe_id == recipe_id) {
      ++r.use_count;
      persist_all();
      return r;
    }
  }
  throw Error(Errc::not_found, "unknown recipe '" + std::string(recipe_id) + "'");
}

std::optional<Recipe> RecipePool::find(std::string_view recipe_id) const {
  std::lock_guard lock(mu_);
  for (const auto& r : recipes_) {
    if (r.recipe_id == recipe_id) return r;
  }
  return std::nullopt;
}

std::vector<Recipe> RecipePool::recipes() const {
  std::lock_guard lock(mu_);
  return recipes_;
}

std::size_t RecipePool::size() const {
  std::lock_guard lock(mu_);
  return recipes_.size();
}

void RecipePool::persist_all() const {
  if (file_.empty()) return;
  std::vector<Json> docs;
  for (const auto& r : recipes_) docs.push_back(r.to_json());
  write_jsonl_file(file_, docs);
}

}  // namespace skillos::recipes
