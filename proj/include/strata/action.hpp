#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "strata/scene.hpp"

namespace strata {

// Coordinates are canvas pixels: origin top-left, x rightward, y downward.

struct remove_action {
  std::string object_id;
};
struct move_action {
  std::string object_id;
  double x = 0;  // new bbox centre
  double y = 0;
};
struct keep_action {
  std::string object_id;
};
struct fall_action {
  std::string object_id;
  double delta_y = 0;
};
struct resize_action {
  std::string object_id;
  double scale = 1;  // relative to the current size
};
struct retouch_action {
  std::string object_id;
  photometric factors;
};
struct edit_action {
  std::string object_id;
  std::string prompt;
  std::string edit_type;
};

struct layer_relation {
  enum class kind { frontmost, backmost, front_of, behind };
  kind where = kind::frontmost;
  std::string target;  // for front_of / behind

  static layer_relation parse(std::string_view text);  // throws parse_error
  std::string str() const;
};

struct insert_action {
  std::string prompt;
  double x = 0;  // centre
  double y = 0;
  double width = 0;
  double height = 0;
  layer_relation relation;
};

using action_params = std::variant<remove_action, move_action, keep_action,
                                   fall_action, resize_action, retouch_action,
                                   edit_action, insert_action>;

struct atomic_action {
  action_params params;
  // Fields not understood by the engine (e.g. the planner's "reason"),
  // carried through serialization untouched.
  nlohmann::json metadata = nlohmann::json::object();
};

std::string_view verb_name(const atomic_action& a);
// Target layer, or nothing for INSERT.
std::optional<std::string> target_id(const atomic_action& a);

bool operator==(const atomic_action& a, const atomic_action& b);

// Accepts either the JSON wire form ({"action_sequence": [...]}) or
// newline-separated DSL lines such as `MOVE lamp 420 310`. Throws
// strata::error with parse_error, unknown_verb, arity_mismatch,
// non_numeric_param or invalid_parameter.
std::vector<atomic_action> parse_script(std::string_view input);

std::vector<atomic_action> parse_action_json(const nlohmann::json& doc);
atomic_action parse_action_record(const nlohmann::json& record);

nlohmann::json to_json(const atomic_action& a);
nlohmann::json serialize_actions(const std::vector<atomic_action>& actions);

// One DSL line; parse_script(to_dsl(a)) reproduces `a` minus metadata.
std::string to_dsl(const atomic_action& a);

}  // namespace strata
