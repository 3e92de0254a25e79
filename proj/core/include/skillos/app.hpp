#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "skillos/config.hpp"
#include "skillos/executor.hpp"
#include "skillos/gateway.hpp"
#include "skillos/recipes.hpp"
#include "skillos/registry.hpp"
#include "skillos/retrieval.hpp"
#include "skillos/tree.hpp"

namespace skillos {

std::shared_ptr<llm::Gateway> make_gateway(const GatewayConfig& config);
std::unique_ptr<executor::ExecutorBackend> make_executor(const ExecutorConfig& config,
                                                         std::shared_ptr<const llm::Gateway> gateway);

/// Everything a command or the service needs, built from one Config. Parts
/// load on first use; after prepare() every accessor is safe to call from
/// several threads.
class App {
 public:
  explicit App(Config config);

  const Config& config() const noexcept { return config_; }
  const llm::Gateway& gateway() const { return *gateway_; }
  std::shared_ptr<const llm::Gateway> gateway_ptr() const { return gateway_; }

  const registry::Ecosystem& ecosystem();
  const std::vector<std::string>& active_ids();
  std::vector<registry::Skill> active_skills();
  /// Loaded from tree_path() when present, otherwise built and saved there.
  const tree::CapabilityTree& tree();
  const registry::DormantIndex& dormant();
  executor::ExecutorBackend& executor_backend();
  recipes::RecipePool& recipes();

  tree::TreeConfig tree_config() const;
  retrieval::RetrievalConfig retrieval_config() const;

  void prepare();

 private:
  Config config_;
  std::shared_ptr<llm::Gateway> gateway_;
  std::recursive_mutex mu_;
  std::optional<registry::Ecosystem> ecosystem_;
  std::optional<std::vector<std::string>> active_;
  std::optional<tree::CapabilityTree> tree_;
  std::optional<registry::DormantIndex> dormant_;
  std::unique_ptr<executor::ExecutorBackend> executor_;
  std::unique_ptr<recipes::RecipePool> recipes_;
};

}  // namespace skillos
