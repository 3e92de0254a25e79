#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "skillos/app.hpp"
#include "skillos/json_io.hpp"

namespace skillos {

struct ServiceResponse {
  int status = 200;
  Json body;
};

/// HTTP front end over App. Stage order is enforced per task; every route
/// answers JSON, except the run event stream which is newline-delimited JSON.
class Service {
 public:
  explicit Service(std::shared_ptr<App> app);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// In-process dispatch used by the HTTP handlers (and by tests).
  ServiceResponse call(std::string_view method, std::string_view path, const Json& body = Json::object(),
                       const std::map<std::string, std::string>& query = {});

  /// Events of a run from index `from`, blocking until at least one newer
  /// event exists or the run finished. Returns false once the terminal event
  /// has been delivered.
  bool wait_events(std::string_view run_id, std::size_t from, std::vector<Json>& out, int timeout_ms);

  /// Binds to host:port (0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires bind().
  void listen();
  void stop();
  /// Joins background runs.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace skillos
