#pragma once

#include <set>
#include <string>
#include <vector>

#include "strata/scene.hpp"

namespace strata {

struct physics_config {
  int contact_tolerance = 2;      // px, both above and below contact
  double overlap_fraction = 0.1;  // of the narrower layer's width
  double balance_margin = 0.05;   // of the supported layer's bbox width
};

struct support_edge {
  std::string supported;
  std::string supporter;
  friend bool operator==(const support_edge&, const support_edge&) = default;
};

struct support_graph {
  std::vector<support_edge> edges;
  std::set<std::string> ground_supported;

  bool is_supported(const std::string& id) const;
  std::vector<std::string> supporters_of(const std::string& id) const;
};

enum class physics_rule { gravity, support, balance };

struct physics_violation {
  std::string layer_id;
  physics_rule rule;
  std::string message;
};

struct generated_fall {
  std::string layer_id;
  int delta_y = 0;
};

struct physics_report {
  support_graph support;  // of the settled state
  std::vector<generated_fall> generated;  // in execution order
  std::vector<physics_violation> violations;
  std::vector<std::string> affected_objects;
  int iterations = 0;
};

// Y rests on X when their horizontal extents overlap by at least
// overlap_fraction of the narrower width and, over the shared columns, the
// smallest gap top_X(col) - bottom_Y(col) lies within +/- contact_tolerance.
// Anchored layers are never reported as supported. A layer whose lowest row
// is within tolerance of ground_y, or below it, rests on the ground.
support_graph infer_support(const environment& env,
                            const physics_config& cfg = {});

// Settles the scene: every visible, gravity-affected, unanchored layer that
// rests on nothing drops to the nearest surface below it (another layer's
// top or the ground). Supports are re-inferred after each pass. The
// environment is not modified; the falls are returned for the caller to
// execute. Balance violations are evaluated on the settled state.
physics_report apply_gravity(const environment& env, const support_graph& support,
                             const physics_config& cfg = {});

// Warns when a supported layer's x-centroid lies outside its contact base
// (widened by balance_margin). Nothing is toppled.
std::vector<physics_violation> check_balance(const environment& env,
                                             const support_graph& support,
                                             const physics_config& cfg = {});

// Layers that gravity would move; used to warn when auto-gravity is off.
std::vector<physics_violation> floating_layers(const environment& env,
                                               const support_graph& support);

std::string_view to_string(physics_rule rule);
nlohmann::json to_json(const physics_report& report);

}  // namespace strata
