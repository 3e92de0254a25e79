// HttpChatBackend / HttpEmbedder against an in-process stub server.

#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

#include "httplib.h"

#include "skillos/error.hpp"
#include "skillos/live_backend.hpp"

using namespace skillos;
using namespace skillos::llm;

namespace {

class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++active_;
      int seen = max_active_.load();
      while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
      }
      std::pair<int, std::string> reply;
      {
        std::lock_guard lock(mu_);
        requests_.push_back(Json::parse(req.body));
        auth_ = req.get_header_value("Authorization");
        if (!replies_.empty()) {
          reply = replies_.front();
          replies_.pop_front();
        } else {
          reply = fallback_;
        }
      }
      if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      --active_;
      res.status = reply.first;
      res.set_content(reply.second, "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu_);
      res.set_content(embedding_reply_, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  static std::string content(const Json& doc) {
    return Json{{"choices", {{{"message", {{"role", "assistant"}, {"content", doc.dump()}}}}}}}.dump();
  }

  void queue(int status, std::string body) {
    std::lock_guard lock(mu_);
    replies_.emplace_back(status, std::move(body));
  }
  void set_fallback(int status, std::string body) {
    std::lock_guard lock(mu_);
    fallback_ = {status, std::move(body)};
  }
  void set_embedding(std::string body) {
    std::lock_guard lock(mu_);
    embedding_reply_ = std::move(body);
  }

  LiveBackendOptions options() const {
    LiveBackendOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
    o.api_key = "sk-test";
    o.default_model = "base-model";
    o.timeout_seconds = 10;
    return o;
  }

  std::vector<Json> requests() {
    std::lock_guard lock(mu_);
    return requests_;
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

  int delay_ms_ = 0;
  std::atomic<int> active_{0};
  std::atomic<int> max_active_{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::deque<std::pair<int, std::string>> replies_;
  std::pair<int, std::string> fallback_{500, "{}"};
  std::vector<Json> requests_;
  std::string auth_;
  std::string embedding_reply_ = "{}";
};

const Json kChoice = {{"choice", 1}};

}  // namespace

TEST(HttpChatBackend, SendsRoleInstructionsAndParsesContent) {
  StubServer stub;
  stub.queue(200, StubServer::content(kChoice));
  auto opts = stub.options();
  opts.models[RoleTag::category_descent] = "small-model";
  HttpChatBackend backend(opts);
  const auto r = backend.complete({RoleTag::category_descent, {{"skill", "x"}}});
  ASSERT_TRUE(r.ok) << r.message;
  EXPECT_EQ(r.document, kChoice);
  const auto req = stub.requests().at(0);
  EXPECT_EQ(req["model"], "small-model");
  EXPECT_EQ(req["messages"][0]["role"], "system");
  EXPECT_EQ(req["messages"][0]["content"], std::string(role_instructions(RoleTag::category_descent)));
  EXPECT_EQ(Json::parse(req["messages"][1]["content"].get<std::string>()), Json({{"skill", "x"}}));
  EXPECT_EQ(req["response_format"]["type"], "json_object");
  EXPECT_EQ(stub.auth(), "Bearer sk-test");
  EXPECT_EQ(backend.model_for(RoleTag::judge), "base-model");
}

TEST(HttpChatBackend, RetriesSchemaViolationsUpToLimit) {
  StubServer stub;
  stub.queue(200, StubServer::content({{"choice", "one"}}));
  stub.queue(200, StubServer::content({{"wrong", true}}));
  stub.queue(200, StubServer::content(kChoice));
  HttpChatBackend backend(stub.options());  // two retries by default
  const auto r = backend.complete({RoleTag::category_descent, {{"q", 1}}});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(stub.requests().size(), 3u);

  StubServer strict;
  strict.set_fallback(200, StubServer::content({{"choice", "never"}}));
  auto opts = strict.options();
  opts.schema_retries = 1;
  HttpChatBackend once(opts);
  const auto bad = once.complete({RoleTag::category_descent, {{"q", 1}}});
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.error_kind, ErrorKind::schema_violation);
  EXPECT_EQ(strict.requests().size(), 2u);
}

TEST(HttpChatBackend, RefusalAndTransportAreNotRetried) {
  StubServer stub;
  stub.queue(200, Json{{"choices", {{{"message", {{"content", nullptr}, {"refusal", "no"}}}}}}}.dump());
  stub.queue(503, "busy");
  stub.queue(200, "not json");
  HttpChatBackend backend(stub.options());
  EXPECT_EQ(backend.complete({RoleTag::judge, {{"a", 1}}}).error_kind, ErrorKind::refusal);
  EXPECT_EQ(backend.complete({RoleTag::judge, {{"a", 2}}}).error_kind, ErrorKind::transport);
  EXPECT_EQ(backend.complete({RoleTag::judge, {{"a", 3}}}).error_kind, ErrorKind::transport);
  EXPECT_EQ(stub.requests().size(), 3u);
}

TEST(HttpChatBackend, UnreachableServerIsTransport) {
  LiveBackendOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.default_model = "m";
  o.timeout_seconds = 2;
  HttpChatBackend backend(o);
  EXPECT_EQ(backend.complete({RoleTag::judge, {{"a", 1}}}).error_kind, ErrorKind::transport);
  EXPECT_THROW(HttpChatBackend(LiveBackendOptions{}), Error);
}

TEST(HttpChatBackend, BoundsConcurrentCalls) {
  StubServer stub;
  stub.delay_ms_ = 80;
  stub.set_fallback(200, StubServer::content(kChoice));
  auto opts = stub.options();
  opts.max_concurrent_calls = 2;
  HttpChatBackend backend(opts);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&, i] { ok += backend.complete({RoleTag::category_descent, {{"i", i}}}).ok; });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 6);
  EXPECT_LE(stub.max_active_.load(), 2);
}

TEST(HttpEmbedder, NormalizesAndChecksDimension) {
  StubServer stub;
  stub.set_embedding(R"({"data":[{"embedding":[3.0, 4.0]}]})");
  HttpEmbedder emb(stub.options(), 2);
  const auto v = emb.embed("hello");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0], 0.6, 1e-12);
  EXPECT_NEAR(v[1], 0.8, 1e-12);
  HttpEmbedder wrong(stub.options(), 3);
  try {
    wrong.embed("hello");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::embedder_failure);
  }
  stub.set_embedding("{}");
  EXPECT_THROW(emb.embed("hello"), Error);
}
