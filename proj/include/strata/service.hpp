#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"
#include "strata/engine.hpp"
#include "strata/error.hpp"
#include "strata/planner.hpp"

namespace httplib {
class Server;
}

namespace strata {

// {"code", "message", "line"?, "offset"?}
nlohmann::json error_payload(const error& e);
int http_status(errc code);

// Layers (id, name, bbox, depth score, visibility, attributes), stacking,
// round, digest and support edges.
nlohmann::json state_summary(const environment& env, const physics_config& cfg = {});

struct service_config {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path bundle_root;  // bundle references resolve under it
  std::string planner_endpoint;       // empty: offline stub
  execute_options exec;
  std::uint64_t seed = 0;             // stub synthesizer seed
  std::filesystem::path journal_dir;  // empty: no persistence
};

// In-memory sessions behind an HTTP API. Mutations of one session are
// serialized; reads work on snapshots.
class service {
 public:
  explicit service(service_config cfg);
  ~service();
  service(const service&) = delete;
  service& operator=(const service&) = delete;

  // Blocks until stop().
  bool listen();
  // Binds to cfg.host on an ephemeral port and returns it; follow with
  // listen_after_bind() on another thread. Used by tests.
  int bind_any_port();
  bool listen_after_bind();
  void stop();

  httplib::Server& server();

 private:
  struct impl;
  std::unique_ptr<impl> impl_;
};

}  // namespace strata
