#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillos/gateway.hpp"
#include "skillos/orchestrator.hpp"

namespace skillos::recipes {

struct Recipe {
  std::string recipe_id;
  std::string task_text;
  Embedding task_embedding;  // unit norm
  orchestrator::OrchestrationPlan plan;
  std::string created_at;  // ISO-8601 UTC
  std::uint64_t use_count = 0;

  Json to_json() const;
  static Recipe from_json(const Json& doc);
};

struct RecipeMatch {
  Recipe recipe;
  double similarity = 0.0;
};

/// Highest-cosine recipe with similarity >= threshold; ties keep the earlier
/// recipe.
std::optional<RecipeMatch> lookup_recipe(const Embedding& task_embedding, const std::vector<Recipe>& pool,
                                         double threshold);

/// Past successful plans, persisted one per line in recipes.jsonl.
/// Thread-safe.
class RecipePool {
 public:
  RecipePool() = default;
  /// Loads the file when it exists; later stores append to it.
  explicit RecipePool(std::filesystem::path file);

  Recipe store(std::string_view task_text, const orchestrator::OrchestrationPlan& plan,
               const llm::Gateway& gateway);
  void insert(Recipe recipe);

  std::optional<RecipeMatch> lookup(std::string_view task_text, const llm::Gateway& gateway,
                                    double threshold) const;
  std::optional<RecipeMatch> lookup(const Embedding& task_embedding, double threshold) const;

  /// Increments use_count and rewrites the file. Returns the updated recipe.
  Recipe apply(std::string_view recipe_id);

  std::optional<Recipe> find(std::string_view recipe_id) const;
  std::vector<Recipe> recipes() const;
  std::size_t size() const;

 private:
  void persist_all() const;

  mutable std::mutex mu_;
  std::filesystem::path file_;
  std::vector<Recipe> recipes_;
};

}  // namespace skillos::recipes
