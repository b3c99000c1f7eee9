#include "strata/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "strata/digest.hpp"
#include "strata/error.hpp"
#include "strata/occlusion.hpp"

namespace strata {

using nlohmann::json;

std::string_view to_string(provenance p) {
  switch (p) {
    case provenance::user: return "user";
    case provenance::planner: return "planner";
    case provenance::physics: return "physics";
  }
  return "user";
}

provenance provenance_from(std::string_view text) {
  if (text == "user") return provenance::user;
  if (text == "planner") return provenance::planner;
  if (text == "physics") return provenance::physics;
  throw error(errc::parse_error, "unknown provenance '" + std::string(text) + "'");
}

json to_json(const action_record& r) {
  json j = {{"action", to_json(r.action)},
            {"provenance", to_string(r.origin)},
            {"round", r.round},
            {"result", r.applied ? "applied" : "rejected"},
            {"notes", r.notes},
            {"pre_digest", r.pre_digest},
            {"post_digest", r.post_digest}};
  if (!r.applied) j["reason"] = r.reason;
  if (r.created_id) j["created_id"] = *r.created_id;
  return j;
}

action_record record_from_json(const json& j) {
  try {
    action_record r;
    r.action = parse_action_record(j.at("action"));
    r.origin = provenance_from(j.at("provenance").get<std::string>());
    r.round = j.at("round").get<int>();
    r.applied = j.at("result").get<std::string>() == "applied";
    if (j.contains("reason")) r.reason = j["reason"].get<std::string>();
    if (j.contains("notes")) r.notes = j["notes"].get<std::vector<std::string>>();
    r.pre_digest = j.at("pre_digest").get<std::string>();
    r.post_digest = j.at("post_digest").get<std::string>();
    if (j.contains("created_id")) r.created_id = j["created_id"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw error(errc::parse_error, std::string("malformed action record: ") + e.what());
  }
}

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::string format_number(double v) { return json(v).dump(); }

// Scaled rasters beyond this multiple of the canvas are refused.
constexpr int max_canvas_multiple = 8;

void clamp_note(double v, double hi, const char* axis, std::vector<std::string>& notes) {
  if (v < 0 || v > hi)
    notes.push_back(std::string(axis) + " clamped from " + format_number(v) + " to " +
                    format_number(std::clamp(v, 0.0, hi)));
}

bool is_geometric(const atomic_action& a) {
  return std::holds_alternative<remove_action>(a.params) ||
         std::holds_alternative<move_action>(a.params) ||
         std::holds_alternative<resize_action>(a.params) ||
         std::holds_alternative<fall_action>(a.params);
}

std::string slug(const std::string& prompt) {
  std::string out;
  for (char c : prompt) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_')
      out += '_';
    if (out.size() >= 24) break;
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "object" : out;
}

void ensure_occlusion_pairs(environment& env) {
  if (env.occlusion) return;
  hard_constraints hard = derive_hard_constraints(env);
  std::vector<occlusion_pair> pairs;
  for (std::size_t i = 0; i < hard.ids.size(); ++i)
    for (std::size_t j = 0; j < hard.ids.size(); ++j)
      if (hard.matrix.at(i, j)) pairs.push_back({hard.ids[i], hard.ids[j]});
  env.occlusion = std::move(pairs);
}

}  // namespace

action_check validate_action(const environment& env, const atomic_action& action) {
  action_check check;
  auto reject = [&](std::string reason) {
    check.ok = false;
    check.reason = std::move(reason);
    return check;
  };

  const object_layer* layer = nullptr;
  if (auto id = target_id(action)) {
    layer = env.find(*id);
    if (!layer) return reject("unknown object '" + *id + "'");
    if (!layer->visible && !std::holds_alternative<keep_action>(action.params))
      return reject("object '" + *id + "' has been removed");
  }

  const double w = env.canvas_width, h = env.canvas_height;
  auto finite = [](double v) { return std::isfinite(v); };
  return std::visit(
      [&](const auto& p) -> action_check {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, move_action>) {
          if (!finite(p.x) || !finite(p.y)) return reject("coordinates must be finite");
          clamp_note(p.x, w, "x", check.notes);
          clamp_note(p.y, h, "y", check.notes);
        } else if constexpr (std::is_same_v<T, fall_action>) {
          if (!finite(p.delta_y) || p.delta_y < 0) return reject("delta_y must be >= 0");
        } else if constexpr (std::is_same_v<T, resize_action>) {
          if (!finite(p.scale) || !(p.scale > 0)) return reject("scale must be > 0");
          object_layer probe = *layer;
          probe.scale *= p.scale;
          vec2i size = probe.scaled_size();
          if (size.x > max_canvas_multiple * env.canvas_width ||
              size.y > max_canvas_multiple * env.canvas_height)
            return reject("resized layer would exceed " + std::to_string(max_canvas_multiple) +
                          "x the canvas");
        } else if constexpr (std::is_same_v<T, retouch_action>) {
          for (double f : {p.factors.brightness, p.factors.contrast, p.factors.color,
                           p.factors.sharpness})
            if (!finite(f) || f < 0) return reject("retouch factors must be >= 0");
        } else if constexpr (std::is_same_v<T, insert_action>) {
          if (!finite(p.x) || !finite(p.y)) return reject("coordinates must be finite");
          if (!finite(p.width) || !finite(p.height) || round_half_up(p.width) < 1 ||
              round_half_up(p.height) < 1)
            return reject("width and height must be at least 1 px");
          if (p.width > max_canvas_multiple * w || p.height > max_canvas_multiple * h)
            return reject("inserted object would exceed " + std::to_string(max_canvas_multiple) +
                          "x the canvas");
          if (p.relation.where == layer_relation::kind::front_of ||
              p.relation.where == layer_relation::kind::behind) {
            const object_layer* t = env.find(p.relation.target);
            if (!t || !t->visible)
              return reject("layer_relation target '" + p.relation.target + "' is not a visible layer");
          }
          clamp_note(p.x, w, "x", check.notes);
          clamp_note(p.y, h, "y", check.notes);
        }
        return check;
      },
      action.params);
}

std::optional<std::string> apply_action(environment& env, const atomic_action& action,
                                        synthesizer& synth) {
  auto layer_of = [&](const std::string& id) -> object_layer& {
    object_layer* l = env.find(id);
    if (!l) throw error(errc::unknown_layer, "unknown layer '" + id + "'");
    return *l;
  };
  return std::visit(
      [&](const auto& p) -> std::optional<std::string> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, remove_action>) {
          layer_of(p.object_id).visible = false;
          std::erase(env.stacking, p.object_id);
        } else if constexpr (std::is_same_v<T, move_action>) {
          object_layer& l = layer_of(p.object_id);
          rect box = l.bbox();
          double tx = std::clamp(p.x, 0.0, static_cast<double>(env.canvas_width));
          double ty = std::clamp(p.y, 0.0, static_cast<double>(env.canvas_height));
          l.offset.x += round_half_up(tx - box.center_x());
          l.offset.y += round_half_up(ty - box.center_y());
        } else if constexpr (std::is_same_v<T, fall_action>) {
          layer_of(p.object_id).offset.y += round_half_up(p.delta_y);
        } else if constexpr (std::is_same_v<T, resize_action>) {
          object_layer& l = layer_of(p.object_id);
          rect before = l.bbox();
          l.scale *= p.scale;
          l.offset = {0, 0};
          rect after = l.bbox();
          l.offset = {round_half_up(before.center_x() - after.center_x()),
                      round_half_up(before.center_y() - after.center_y())};
        } else if constexpr (std::is_same_v<T, retouch_action>) {
          photometric& a = layer_of(p.object_id).attributes;
          a.brightness *= p.factors.brightness;
          a.contrast *= p.factors.contrast;
          a.color *= p.factors.color;
          a.sharpness *= p.factors.sharpness;
        } else if constexpr (std::is_same_v<T, edit_action>) {
          object_layer& l = layer_of(p.object_id);
          raster edited = synth.edit(l.amodal, p.prompt, p.edit_type);
          if (edited.width() != l.amodal.width() || edited.height() != l.amodal.height())
            throw error(errc::size_mismatch, "synthesizer changed the layer size");
          for (int y = 0; y < edited.height(); ++y)
            for (int x = 0; x < edited.width(); ++x) {
              rgba px = edited.at(x, y);
              px.a = l.amodal.at(x, y).a;
              edited.set(x, y, px);
            }
          l.amodal = std::move(edited);
        } else if constexpr (std::is_same_v<T, keep_action>) {
          // logged only
        } else if constexpr (std::is_same_v<T, insert_action>) {
          const int w = round_half_up(p.width), h = round_half_up(p.height);
          raster pixels = synth.generate(p.prompt, w, h);
          if (pixels.width() != w || pixels.height() != h)
            throw error(errc::size_mismatch, "synthesizer returned the wrong size");
          ensure_occlusion_pairs(env);

          object_layer layer;
          std::string base = slug(p.prompt);
          layer.id = base;
          for (int n = 2; env.find(layer.id); ++n) layer.id = base + "_" + std::to_string(n);
          layer.name = p.prompt;
          layer.amodal = std::move(pixels);
          double cx = std::clamp(p.x, 0.0, static_cast<double>(env.canvas_width));
          double cy = std::clamp(p.y, 0.0, static_cast<double>(env.canvas_height));
          layer.offset = {round_half_up(cx - w / 2.0), round_half_up(cy - h / 2.0)};

          auto& pairs = *env.occlusion;
          const std::string& id = layer.id;
          switch (p.relation.where) {
            case layer_relation::kind::frontmost:
              for (const auto& other : env.layers)
                if (other.visible) pairs.push_back({other.id, id});
              break;
            case layer_relation::kind::backmost:
              for (const auto& other : env.layers)
                if (other.visible) pairs.push_back({id, other.id});
              break;
            case layer_relation::kind::front_of:
              pairs.push_back({p.relation.target, id});
              break;
            case layer_relation::kind::behind:
              pairs.push_back({id, p.relation.target});
              break;
          }
          env.layers.push_back(std::move(layer));
          order_environment(env);
          return env.layers.back().id;
        }
        return std::nullopt;
      },
      action.params);
}

execution_result execute(environment& env, const atomic_action& action, synthesizer& synth,
                         const execute_options& opts, provenance origin) {
  execution_result result;
  action_record rec;
  rec.action = action;
  rec.origin = origin;
  rec.round = env.round + 1;
  rec.pre_digest = state_digest(env);
  rec.post_digest = rec.pre_digest;

  auto rejected = [&](std::string reason) {
    rec.applied = false;
    rec.reason = std::move(reason);
    result.records.push_back(rec);
    result.physics.support = infer_support(env, opts.physics);
    return result;
  };

  action_check check = validate_action(env, action);
  if (!check.ok) return rejected(check.reason);
  rec.notes = check.notes;

  synthesizer_caps caps = synth.capabilities();
  if (std::holds_alternative<edit_action>(action.params) && !caps.can_edit)
    return rejected("synthesizer unavailable: EDIT needs a synthesizer that can edit");
  if (std::holds_alternative<insert_action>(action.params) && !caps.can_insert)
    return rejected("synthesizer unavailable: INSERT needs a synthesizer that can insert");

  environment working = env;
  try {
    rec.created_id = apply_action(working, action, synth);
  } catch (const error& e) {
    return rejected(e.what());
  }
  rec.applied = true;
  rec.post_digest = state_digest(working);
  result.records.push_back(rec);

  if (opts.auto_gravity && is_geometric(action)) {
    support_graph support = infer_support(working, opts.physics);
    result.physics = apply_gravity(working, support, opts.physics);
    for (const auto& fall : result.physics.generated) {
      action_record child;
      child.action.params = fall_action{fall.layer_id, static_cast<double>(fall.delta_y)};
      child.origin = provenance::physics;
      child.round = rec.round;
      child.applied = true;
      child.pre_digest = state_digest(working);
      apply_action(working, child.action, synth);
      child.post_digest = state_digest(working);
      result.records.push_back(std::move(child));
    }
  } else {
    result.physics.support = infer_support(working, opts.physics);
    result.physics.violations = check_balance(working, result.physics.support, opts.physics);
    if (!opts.auto_gravity) {
      auto floating = floating_layers(working, result.physics.support);
      result.physics.violations.insert(result.physics.violations.end(), floating.begin(),
                                       floating.end());
    }
  }
  env = std::move(working);
  return result;
}

json to_json(const round_report& r) {
  json records = json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  return {{"round", r.round},
          {"records", std::move(records)},
          {"physics", to_json(r.physics)},
          {"digest", r.digest}};
}

// ------------------------------------------------------------------ session

session::session(environment base, std::shared_ptr<synthesizer> synth, execute_options opts)
    : base_(std::move(base)), state_(base_), synth_(std::move(synth)), opts_(opts) {
  if (!synth_) synth_ = std::make_shared<null_synthesizer>();
}

std::string session::digest() const { return state_digest(state_); }

void session::emit(const json& event) {
  if (sink_) sink_(event);
}

round_report session::run_round(const std::vector<atomic_action>& actions, provenance origin) {
  round_report report;
  report.round = state_.round + 1;
  for (const auto& a : actions) {
    execution_result res = execute(state_, a, *synth_, opts_, origin);
    for (auto& rec : res.records) {
      json rj = to_json(rec);
      journal_.push_back({{"type", "record"}, {"record", rj}});
      std::string kind = !rec.applied ? "action_rejected"
                         : rec.origin == provenance::physics ? "physics_generated"
                                                              : "action_applied";
      emit({{"event", kind}, {"round", report.round}, {"record", rj}});
      log_.push_back(rec);
      report.records.push_back(std::move(rec));
    }
    auto& agg = report.physics;
    agg.generated.insert(agg.generated.end(), res.physics.generated.begin(),
                         res.physics.generated.end());
    agg.violations.insert(agg.violations.end(), res.physics.violations.begin(),
                          res.physics.violations.end());
    for (const auto& id : res.physics.affected_objects)
      if (std::find(agg.affected_objects.begin(), agg.affected_objects.end(), id) ==
          agg.affected_objects.end())
        agg.affected_objects.push_back(id);
    agg.iterations = std::max(agg.iterations, res.physics.iterations);
  }
  report.physics.support = infer_support(state_, opts_.physics);
  state_.round = report.round;
  report.digest = digest();
  journal_.push_back({{"type", "round_complete"}, {"round", report.round}});
  emit({{"event", "round_complete"}, {"round", report.round}, {"digest", report.digest}});
  return report;
}

environment session::rebuild(std::size_t record_count) const {
  environment env = base_;
  for (std::size_t i = 0; i < record_count; ++i)
    if (log_[i].applied) {
      env.round = log_[i].round - 1;
      apply_action(env, log_[i].action, *synth_);
    }
  return env;
}

void session::undo(std::size_t k) {
  if (k == 0) throw error(errc::invalid_parameter, "undo count must be at least 1");
  std::size_t found = 0;
  std::optional<std::size_t> cut;
  for (std::size_t i = log_.size(); i-- > 0;) {
    const auto& r = log_[i];
    if (r.applied && r.origin != provenance::physics && ++found == k) {
      cut = i;
      break;
    }
  }
  if (!cut)
    throw error(errc::nothing_to_undo, "cannot undo " + std::to_string(k) + " action(s); only " +
                                           std::to_string(found) + " applied");

  environment rebuilt = rebuild(*cut);
  rebuilt.round = state_.round;
  if (state_digest(rebuilt) != log_[*cut].pre_digest)
    throw error(errc::io_failure, "replay diverged while undoing");
  state_ = std::move(rebuilt);
  log_.resize(*cut);
  journal_.push_back({{"type", "undo"}, {"k", k}});
  emit({{"event", "state_reset"}, {"undone", k}, {"round", state_.round}, {"digest", digest()}});
}

environment session::state_at_round(int r) const {
  if (r < 0 || r > state_.round)
    throw error(errc::round_out_of_range, "round " + std::to_string(r) + " outside [0, " +
                                              std::to_string(state_.round) + "]");
  std::size_t n = 0;
  while (n < log_.size() && log_[n].round <= r) ++n;
  environment env = rebuild(n);
  env.round = r;
  return env;
}

session session::replay(environment base, const std::vector<json>& journal,
                        std::shared_ptr<synthesizer> synth, execute_options opts) {
  session s(std::move(base), std::move(synth), opts);
  for (std::size_t i = 0; i < journal.size(); ++i) {
    const json& entry = journal[i];
    std::string type = entry.value("type", "");
    if (type == "record") {
      action_record rec = record_from_json(entry.at("record"));
      if (s.digest() != rec.pre_digest)
        throw error(errc::parse_error, "journal entry " + std::to_string(i) +
                                           " does not follow from the preceding state");
      if (rec.applied) {
        s.state_.round = rec.round - 1;
        apply_action(s.state_, rec.action, *s.synth_);
        s.state_.round = rec.round - 1;
        if (s.digest() != rec.post_digest)
          throw error(errc::parse_error,
                      "journal entry " + std::to_string(i) + " replays to a different state");
      }
      s.log_.push_back(std::move(rec));
      s.journal_.push_back(entry);
    } else if (type == "round_complete") {
      s.state_.round = entry.at("round").get<int>();
      s.journal_.push_back(entry);
    } else if (type == "undo") {
      s.undo(entry.at("k").get<std::size_t>());
    } else if (type == "session") {
      s.journal_.push_back(entry);
    } else {
      throw error(errc::parse_error, "unknown journal entry type '" + type + "'");
    }
  }
  return s;
}

std::vector<std::string> touched_layers(const std::vector<action_record>& log) {
  std::vector<std::string> out;
  auto add = [&](const std::string& id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  for (const auto& r : log) {
    if (!r.applied) continue;
    if (auto id = target_id(r.action)) add(*id);
    if (r.created_id) add(*r.created_id);
  }
  return out;
}

}  // namespace strata
