#include "skillos/live_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "skillos/error.hpp"

namespace skillos::llm {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::invalid_config, "base URL needs a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.origin = base_url;
  } else {
    ep.origin = base_url.substr(0, path_start);
    ep.prefix = base_url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  }
  return ep;
}

httplib::Result post_json(const LiveBackendOptions& options, const std::string& path,
                          const Json& body) {
  const auto ep = split_url(options.base_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(options.timeout_seconds, 0);
  client.set_read_timeout(options.timeout_seconds, 0);
  client.set_write_timeout(options.timeout_seconds, 0);
  httplib::Headers headers;
  if (!options.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options.api_key);
  }
  return client.Post(ep.prefix + path, headers, body.dump(), "application/json");
}

}  // namespace

void apply_environment(LiveBackendOptions& options) {
  if (const char* url = std::getenv("SKILLOS_LLM_BASE_URL"); url && *url) options.base_url = url;
  if (const char* key = std::getenv("SKILLOS_LLM_API_KEY"); key && *key) options.api_key = key;
}

HttpChatBackend::HttpChatBackend(LiveBackendOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw Error(Errc::invalid_config, "live backend needs a base URL");
  if (options_.schema_retries < 0) options_.schema_retries = 0;
  if (options_.max_concurrent_calls < 1) options_.max_concurrent_calls = 1;
}

const std::string& HttpChatBackend::model_for(RoleTag role) const {
  if (const auto it = options_.models.find(role); it != options_.models.end()) return it->second;
  return options_.default_model;
}

ChatResult HttpChatBackend::complete(const ChatCall& call) {
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_concurrent_calls; });
    ++in_flight_;
  }
  struct Release {
    HttpChatBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->slots_mutex_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  ChatResult last;
  for (int attempt_no = 0; attempt_no <= options_.schema_retries; ++attempt_no) {
    last = attempt(call);
    if (last.ok || last.error_kind != ErrorKind::schema_violation) return last;
  }
  return last;
}

ChatResult HttpChatBackend::attempt(const ChatCall& call) {
  Json body = {
      {"model", model_for(call.role)},
      {"messages",
       Json::array({
           {{"role", "system"}, {"content", std::string(role_instructions(call.role))}},
           {{"role", "user"}, {"content", call.payload.dump()}},
       })},
      {"response_format", {{"type", "json_object"}}},
  };
  auto res = post_json(options_, "/chat/completions", body);
  if (!res) {
    return ChatResult::failure(ErrorKind::transport, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    return ChatResult::failure(ErrorKind::transport, "HTTP " + std::to_string(res->status));
  }
  Json envelope;
  try {
    envelope = Json::parse(res->body);
  } catch (const Json::parse_error&) {
    return ChatResult::failure(ErrorKind::transport, "unparsable response envelope");
  }
  if (!envelope.contains("choices") || !envelope["choices"].is_array() || envelope["choices"].empty()) {
    return ChatResult::failure(ErrorKind::transport, "response has no choices");
  }
  const auto& choice = envelope["choices"][0];
  const auto& message = choice.value("message", Json::object());
  if ((message.contains("refusal") && !message["refusal"].is_null()) ||
      choice.value("finish_reason", "") == "content_filter") {
    return ChatResult::failure(ErrorKind::refusal, message.value("refusal", Json("content filtered")).dump());
  }
  if (!message.contains("content") || !message["content"].is_string()) {
    return ChatResult::failure(ErrorKind::schema_violation, "message has no text content");
  }
  Json doc;
  try {
    doc = Json::parse(message["content"].get<std::string>());
  } catch (const Json::parse_error&) {
    return ChatResult::failure(ErrorKind::schema_violation, "content is not JSON");
  }
  if (auto violation = validate_response(call.role, doc)) {
    return ChatResult::failure(ErrorKind::schema_violation, *violation);
  }
  return ChatResult::success(std::move(doc));
}

HttpEmbedder::HttpEmbedder(LiveBackendOptions options, std::size_t dimension)
    : options_(std::move(options)), dimension_(dimension) {
  if (options_.base_url.empty()) throw Error(Errc::invalid_config, "live embedder needs a base URL");
}

Embedding HttpEmbedder::embed(std::string_view text) {
  if (text.empty()) throw Error(Errc::embedder_failure, "cannot embed empty text");
  Json body = {{"model", options_.embedding_model}, {"input", std::string(text)}};
  auto res = post_json(options_, "/embeddings", body);
  if (!res) throw Error(Errc::transport, "embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::transport, "embedding HTTP " + std::to_string(res->status));
  try {
    const auto doc = Json::parse(res->body);
    Embedding v = doc.at("data").at(0).at("embedding").get<Embedding>();
    if (v.size() != dimension_) {
      throw Error(Errc::embedder_failure, "embedding dimension " + std::to_string(v.size()) +
                                              " != configured " + std::to_string(dimension_));
    }
    normalize(v);
    return v;
  } catch (const Json::exception& e) {
    throw Error(Errc::transport, std::string("malformed embedding response: ") + e.what());
  }
}

}  // namespace skillos::llm
