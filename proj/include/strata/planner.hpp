#pragma once

#include <memory>
#include <string>
#include <vector>

#include "strata/action.hpp"
#include "strata/physics.hpp"
#include "strata/scene.hpp"

namespace strata {

// The planner prompt with its placeholders filled in.
std::string render_planner_prompt(const environment& env, const support_graph& support,
                                  const std::string& instruction);

// Layer names, boxes, depth scores and support edges, one line each.
std::string describe_scene(const environment& env, const support_graph& support);

// Stands in for the physical reasoning step: support relations, what would
// fall if a supporter went away, and current violations.
std::string describe_physics(const environment& env, const support_graph& support,
                             const physics_config& cfg = {});

struct planner_request {
  std::string prompt;       // fully rendered template
  std::string instruction;  // raw user text
  const environment* env = nullptr;
};

class planner_client {
 public:
  virtual ~planner_client() = default;
  // Returns the model's raw reply. Throws planner_unreachable.
  virtual std::string complete(const planner_request& request) = 0;
};

// Keyword templates for "remove/move/resize <name>" phrasings. Good enough
// for tests and demos; it does not understand free text.
class offline_planner : public planner_client {
 public:
  std::string complete(const planner_request& request) override;
};

// POSTs {"prompt", "instruction"} as JSON to an endpoint and takes the
// response body as the reply.
class http_planner : public planner_client {
 public:
  explicit http_planner(std::string url, int timeout_seconds = 60);
  std::string complete(const planner_request& request) override;

 private:
  std::string base_;
  std::string path_;
  int timeout_;
};

// Factory for CLI/service config: empty or "offline" gives the stub.
std::shared_ptr<planner_client> make_planner(const std::string& endpoint);

// Renders the prompt, asks the client and parses the reply. An empty or
// unparsable reply throws planner_malformed_reply.
std::vector<atomic_action> plan(const std::string& instruction, const environment& env,
                                planner_client& client, const physics_config& cfg = {});

}  // namespace strata
