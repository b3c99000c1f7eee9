#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/action.hpp"
#include "strata/physics.hpp"
#include "strata/scene.hpp"
#include "strata/synthesizer.hpp"

namespace strata {

enum class provenance { user, planner, physics };

std::string_view to_string(provenance p);
provenance provenance_from(std::string_view text);  // throws parse_error

struct action_record {
  atomic_action action;
  provenance origin = provenance::user;
  int round = 0;
  bool applied = false;
  std::string reason;               // rejection reason when !applied
  std::vector<std::string> notes;   // e.g. coordinate clamping
  std::string pre_digest;
  std::string post_digest;
  std::optional<std::string> created_id;  // INSERT
};

nlohmann::json to_json(const action_record& r);
action_record record_from_json(const nlohmann::json& j);

struct action_check {
  bool ok = true;
  std::string reason;
  std::vector<std::string> notes;
};

// Checks ids, numeric ranges, relation targets and canvas clamping. Never
// throws; a rejection is returned as data.
action_check validate_action(const environment& env, const atomic_action& action);

struct execute_options {
  bool auto_gravity = true;
  physics_config physics;
};

struct execution_result {
  // The action's own record first, then any physics-generated FALLs.
  std::vector<action_record> records;
  physics_report physics;
};

// Executes one action atomically: either every effect lands or `env` is left
// untouched and the returned record is a rejection. With auto-gravity on,
// REMOVE/MOVE/RESIZE/FALL are followed by the gravity fixpoint and the
// resulting FALLs are applied and logged with physics provenance.
execution_result execute(environment& env, const atomic_action& action,
                         synthesizer& synth, const execute_options& opts,
                         provenance origin = provenance::user);

struct round_report {
  int round = 0;
  std::vector<action_record> records;
  physics_report physics;  // generated falls and warnings of the whole round
  std::string digest;      // after the round
};

nlohmann::json to_json(const round_report& r);

// One editing session over a base scene: the live environment, the action
// log and an append-only journal from which the session can be rebuilt.
// Not thread-safe; callers serialize mutations.
class session {
 public:
  using event_sink = std::function<void(const nlohmann::json&)>;

  session(environment base, std::shared_ptr<synthesizer> synth,
          execute_options opts = {});

  const environment& state() const { return state_; }
  const environment& base() const { return base_; }
  const std::vector<action_record>& log() const { return log_; }
  const std::vector<nlohmann::json>& journal() const { return journal_; }
  int round() const { return state_.round; }
  std::string digest() const;
  const execute_options& options() const { return opts_; }

  void set_event_sink(event_sink sink) { sink_ = std::move(sink); }

  // Executes the actions in order as the next round. A rejected action is
  // logged and the rest of the round still runs.
  round_report run_round(const std::vector<atomic_action>& actions,
                         provenance origin = provenance::user);

  // Rebuilds the state without the last k user/planner action groups (each
  // group is an applied action plus the physics FALLs it triggered). The
  // round counter is left as is. Throws nothing_to_undo.
  void undo(std::size_t k);

  // State after round r (0 = base), replayed from the current log.
  environment state_at_round(int r) const;

  // Rebuilds a session from its base scene and journal lines. Applied records
  // are replayed verbatim and their digests are checked.
  static session replay(environment base, const std::vector<nlohmann::json>& journal,
                        std::shared_ptr<synthesizer> synth, execute_options opts = {});

 private:
  void emit(const nlohmann::json& event);
  environment rebuild(std::size_t record_count) const;

  environment base_;
  environment state_;
  std::shared_ptr<synthesizer> synth_;
  execute_options opts_;
  std::vector<action_record> log_;
  std::vector<nlohmann::json> journal_;
  event_sink sink_;
};

// Applies an already-validated action without physics follow-up; used by
// replay. Returns the id of a created layer for INSERT.
std::optional<std::string> apply_action(environment& env, const atomic_action& action,
                                        synthesizer& synth);

// Layer ids whose state an action log touched (targets, physics-moved layers
// and inserted layers).
std::vector<std::string> touched_layers(const std::vector<action_record>& log);

}  // namespace strata
