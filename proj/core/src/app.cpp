#include "skillos/app.hpp"

#include "skillos/categorizer.hpp"
#include "skillos/error.hpp"
#include "skillos/live_backend.hpp"
#include "skillos/offline_policy.hpp"

namespace skillos {

std::shared_ptr<llm::Gateway> make_gateway(const GatewayConfig& config) {
  std::shared_ptr<llm::Embedder> embedder;
  if (config.embedder == "http") {
    embedder = std::make_shared<llm::HttpEmbedder>(config.live, config.embedding_dimension);
  } else {
    embedder = std::make_shared<llm::HashingEmbedder>(config.embedding_dimension);
  }
  std::shared_ptr<llm::ChatBackend> chat;
  if (config.backend == "live") {
    chat = std::make_shared<llm::HttpChatBackend>(config.live);
  } else {
    auto scripted = config.fixtures.empty() ? std::make_shared<llm::ScriptedBackend>(Json::object(), config.strict)
                                            : llm::ScriptedBackend::from_file(config.fixtures, config.strict);
    if (!config.strict) llm::OfflinePolicy(embedder).install(*scripted);
    chat = scripted;
  }
  return std::make_shared<llm::Gateway>(std::move(chat), std::move(embedder));
}

std::unique_ptr<executor::ExecutorBackend> make_executor(const ExecutorConfig& config,
                                                         std::shared_ptr<const llm::Gateway> gateway) {
  if (config.backend == "gateway") return std::make_unique<executor::GatewayExecutor>(std::move(gateway));
  if (config.backend == "command") return std::make_unique<executor::CommandExecutor>(config.command);
  auto script = config.script_file.empty() ? config.script : read_json_file(config.script_file);
  return std::make_unique<executor::ScriptedExecutor>(std::move(script));
}

App::App(Config config) : config_(std::move(config)) {
  config_.validate();
  gateway_ = make_gateway(config_.gateway);
}

tree::TreeConfig App::tree_config() const {
  tree::TreeConfig c;
  c.branching = config_.branching;
  c.capacity = config_.capacity;
  c.validate();
  return c;
}

retrieval::RetrievalConfig App::retrieval_config() const {
  return {config_.shortlist_size, config_.dormant_n};
}

const registry::Ecosystem& App::ecosystem() {
  std::lock_guard lock(mu_);
  if (!ecosystem_) {
    if (!config_.ecosystem.empty()) {
      auto eco = registry::Ecosystem::load(config_.ecosystem);
      for (const auto& id : config_.user_skills) eco.add_user_id(id);
      ecosystem_ = std::move(eco);
    } else if (!config_.corpus.empty()) {
      ecosystem_ = registry::ecosystem_from_corpus(config_.corpus, config_.user_skills);
    } else {
      throw Error(Errc::invalid_config, "no skill source configured (set corpus or ecosystem)");
    }
  }
  return *ecosystem_;
}

const std::vector<std::string>& App::active_ids() {
  std::lock_guard lock(mu_);
  if (!active_) active_ = registry::select_active_set(ecosystem(), config_.top_k);
  return *active_;
}

std::vector<registry::Skill> App::active_skills() {
  std::lock_guard lock(mu_);
  std::vector<registry::Skill> out;
  for (const auto& id : active_ids()) out.push_back(ecosystem().at(id));
  return out;
}

const tree::CapabilityTree& App::tree() {
  std::lock_guard lock(mu_);
  if (!tree_) {
    const auto path = config_.tree_path();
    if (fs::exists(path)) {
      tree_ = tree::CapabilityTree::load(path);
    } else {
      tree::BuildOptions opts;
      opts.parallelism = config_.tree_parallelism;
      const auto skills = active_skills();
      tree_ = tree::build_tree(skills, tree_config(), *gateway_, opts);
      tree_->save(path);
    }
  }
  return *tree_;
}

const registry::DormantIndex& App::dormant() {
  std::lock_guard lock(mu_);
  if (!dormant_) dormant_ = registry::build_dormant_index(ecosystem(), active_ids(), *gateway_->embedder());
  return *dormant_;
}

executor::ExecutorBackend& App::executor_backend() {
  std::lock_guard lock(mu_);
  if (!executor_) executor_ = make_executor(config_.executor, gateway_);
  return *executor_;
}

recipes::RecipePool& App::recipes() {
  std::lock_guard lock(mu_);
  if (!recipes_) {
    fs::create_directories(config_.workspace);
    recipes_ = std::make_unique<recipes::RecipePool>(config_.recipes_file());
  }
  return *recipes_;
}

void App::prepare() {
  fs::create_directories(config_.workspace);
  tree();
  dormant();
  executor_backend();
  recipes();
}

}  // namespace skillos
