#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <string>

#include "skillos/gateway.hpp"

namespace skillos::llm {

struct LiveBackendOptions {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string default_model;
  std::map<RoleTag, std::string> models;  // per-role overrides
  int schema_retries = 2;
  int max_concurrent_calls = 4;
  int timeout_seconds = 120;
  std::string embedding_model;
};

/// Fills base_url/api_key from SKILLOS_LLM_BASE_URL / SKILLOS_LLM_API_KEY when
/// those variables are set.
void apply_environment(LiveBackendOptions& options);

/// OpenAI-compatible chat-completions client. Each call sends the role's
/// instruction text as the system message and the payload as the user
/// message, requesting a JSON object reply.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(LiveBackendOptions options);
  ChatResult complete(const ChatCall& call) override;

  const std::string& model_for(RoleTag role) const;

 private:
  ChatResult attempt(const ChatCall& call);

  LiveBackendOptions options_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

/// Embeddings endpoint client; vectors are renormalized on receipt.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(LiveBackendOptions options, std::size_t dimension);
  Embedding embed(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }

 private:
  LiveBackendOptions options_;
  std::size_t dimension_;
};

}  // namespace skillos::llm
