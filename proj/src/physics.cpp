#include "strata/physics.hpp"

#include <algorithm>
#include <climits>
#include <map>

namespace strata {

bool support_graph::is_supported(const std::string& id) const {
  if (ground_supported.count(id)) return true;
  return std::any_of(edges.begin(), edges.end(),
                     [&](const support_edge& e) { return e.supported == id; });
}

std::vector<std::string> support_graph::supporters_of(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& e : edges)
    if (e.supported == id) out.push_back(e.supporter);
  return out;
}

namespace {

constexpr int none = INT_MIN;

// Per-column extremes of a placed mask, in canvas rows.
struct column_profile {
  placed_mask placed;
  int min_x = 0;  // first column with a set pixel (canvas)
  int max_x = -1;
  std::vector<int> top;     // indexed by column - placed.origin.x
  std::vector<int> bottom;
  int lowest = none;        // max bottom over all columns

  bool empty() const { return max_x < min_x; }
  int width() const { return max_x - min_x + 1; }
  int top_at(int x) const {
    int lx = x - placed.origin.x;
    return (lx < 0 || lx >= static_cast<int>(top.size())) ? none : top[lx];
  }
  int bottom_at(int x) const {
    int lx = x - placed.origin.x;
    return (lx < 0 || lx >= static_cast<int>(bottom.size())) ? none : bottom[lx];
  }
  // First set row strictly below `row` in canvas column x.
  int first_below(int x, int row) const {
    int lx = x - placed.origin.x;
    if (lx < 0 || lx >= placed.bits.width()) return none;
    int start = std::max(row + 1 - placed.origin.y, 0);
    for (int ly = start; ly < placed.bits.height(); ++ly)
      if (placed.bits.at(lx, ly)) return placed.origin.y + ly;
    return none;
  }
};

column_profile profile(const object_layer& layer) {
  column_profile p;
  p.placed = layer.placed_amodal();
  const mask& m = p.placed.bits;
  p.top.assign(m.width(), none);
  p.bottom.assign(m.width(), none);
  p.min_x = INT_MAX;
  p.max_x = INT_MIN;
  for (int x = 0; x < m.width(); ++x) {
    for (int y = 0; y < m.height(); ++y) {
      if (!m.at(x, y)) continue;
      if (p.top[x] == none) p.top[x] = p.placed.origin.y + y;
      p.bottom[x] = p.placed.origin.y + y;
    }
    if (p.top[x] != none) {
      p.min_x = std::min(p.min_x, p.placed.origin.x + x);
      p.max_x = std::max(p.max_x, p.placed.origin.x + x);
      p.lowest = std::max(p.lowest, p.bottom[x]);
    }
  }
  if (p.min_x == INT_MAX) {
    p.min_x = 0;
    p.max_x = -1;
  }
  return p;
}

using profile_map = std::map<std::string, column_profile>;

profile_map visible_profiles(const environment& env) {
  profile_map out;
  for (const auto& l : env.layers)
    if (l.visible) {
      auto p = profile(l);
      if (!p.empty()) out.emplace(l.id, std::move(p));
    }
  return out;
}

// Smallest top_X - bottom_Y over shared columns, or `none` when Y and X do
// not overlap enough horizontally to count.
int contact_gap(const column_profile& y, const column_profile& x,
                const physics_config& cfg) {
  int lo = std::max(y.min_x, x.min_x);
  int hi = std::min(y.max_x, x.max_x);
  if (hi < lo) return none;
  double needed = cfg.overlap_fraction * std::min(y.width(), x.width());
  if (hi - lo + 1 < needed) return none;
  int best = none;
  for (int c = lo; c <= hi; ++c) {
    int b = y.bottom_at(c);
    int t = x.top_at(c);
    if (b == none || t == none) continue;
    int gap = t - b;
    if (best == none || gap < best) best = gap;
  }
  return best;
}

support_graph infer_support(const environment& env, const profile_map& profiles,
                            const physics_config& cfg) {
  support_graph g;
  for (const auto& ly : env.layers) {
    if (!ly.visible || ly.anchored) continue;
    auto yit = profiles.find(ly.id);
    if (yit == profiles.end()) continue;
    const column_profile& y = yit->second;
    for (const auto& lx : env.layers) {
      if (lx.id == ly.id || !lx.visible) continue;
      auto xit = profiles.find(lx.id);
      if (xit == profiles.end()) continue;
      int gap = contact_gap(y, xit->second, cfg);
      if (gap != none && gap >= -cfg.contact_tolerance && gap <= cfg.contact_tolerance)
        g.edges.push_back({ly.id, lx.id});
    }
    if (env.ground_y - y.lowest <= cfg.contact_tolerance) g.ground_supported.insert(ly.id);
  }
  return g;
}

// Drop distance so the layer comes to rest one row above the nearest
// surface beneath any of its columns.
int drop_distance(const std::string& id, const column_profile& y,
                  const profile_map& profiles, int ground_y) {
  int best = INT_MAX;
  for (int c = y.min_x; c <= y.max_x; ++c) {
    int b = y.bottom_at(c);
    if (b == none) continue;
    int surface = ground_y;
    for (const auto& [other_id, other] : profiles) {
      if (other_id == id) continue;
      int r = other.first_below(c, b);
      if (r != none) surface = std::min(surface, r);
    }
    best = std::min(best, surface - b - 1);
  }
  return best == INT_MAX ? 0 : best;
}

}  // namespace

support_graph infer_support(const environment& env, const physics_config& cfg) {
  return infer_support(env, visible_profiles(env), cfg);
}

physics_report apply_gravity(const environment& env, const support_graph& support,
                             const physics_config& cfg) {
  physics_report report;
  environment sim = env;
  std::set<std::string> settled;
  const int max_passes = static_cast<int>(env.layers.size()) + 1;

  support_graph current = support;
  for (int pass = 0; pass < max_passes; ++pass) {
    profile_map profiles = visible_profiles(sim);
    if (pass > 0) current = infer_support(sim, profiles, cfg);

    std::vector<std::string> candidates;
    for (const auto& l : sim.layers)
      if (l.visible && l.affected_by_gravity && !l.anchored && profiles.count(l.id) &&
          !current.is_supported(l.id) && !settled.count(l.id))
        candidates.push_back(l.id);
    if (candidates.empty()) break;
    report.iterations = pass + 1;

    // lowest first, so anything resting above lands on the moved layer
    std::sort(candidates.begin(), candidates.end(),
              [&](const std::string& a, const std::string& b) {
                int la = profiles.at(a).lowest, lb = profiles.at(b).lowest;
                return la != lb ? la > lb : a < b;
              });
    for (const auto& id : candidates) {
      int delta = drop_distance(id, profiles.at(id), profiles, sim.ground_y);
      if (delta <= 0) {
        settled.insert(id);
        report.violations.push_back(
            {id, physics_rule::support,
             "resting on a surface without enough contact to count as support; left in place"});
        continue;
      }
      object_layer* layer = sim.find(id);
      layer->offset.y += delta;
      profiles[id] = profile(*layer);
      report.generated.push_back({id, delta});
      if (std::find(report.affected_objects.begin(), report.affected_objects.end(), id) ==
          report.affected_objects.end())
        report.affected_objects.push_back(id);
    }
  }

  report.support = infer_support(sim, cfg);
  for (const auto& l : sim.layers)
    if (l.visible && l.affected_by_gravity && !l.anchored && !settled.count(l.id) &&
        !l.placed_amodal().tight_bounds().empty() && !report.support.is_supported(l.id))
      report.violations.push_back(
          {l.id, physics_rule::gravity, "still unsupported after settling"});
  auto balance = check_balance(sim, report.support, cfg);
  report.violations.insert(report.violations.end(), balance.begin(), balance.end());
  return report;
}

std::vector<physics_violation> check_balance(const environment& env,
                                             const support_graph& support,
                                             const physics_config& cfg) {
  std::vector<physics_violation> out;
  profile_map profiles = visible_profiles(env);
  for (const auto& l : env.layers) {
    if (!l.visible || !support.is_supported(l.id)) continue;
    auto yit = profiles.find(l.id);
    if (yit == profiles.end()) continue;
    const column_profile& y = yit->second;

    int base_min = INT_MAX, base_max = INT_MIN;
    auto contact = [&](int c) {
      base_min = std::min(base_min, c);
      base_max = std::max(base_max, c + 1);
    };
    for (const auto& supporter : support.supporters_of(l.id)) {
      auto xit = profiles.find(supporter);
      if (xit == profiles.end()) continue;
      for (int c = std::max(y.min_x, xit->second.min_x);
           c <= std::min(y.max_x, xit->second.max_x); ++c) {
        int b = y.bottom_at(c), t = xit->second.top_at(c);
        if (b != none && t != none && t - b >= -cfg.contact_tolerance &&
            t - b <= cfg.contact_tolerance)
          contact(c);
      }
    }
    if (support.ground_supported.count(l.id))
      for (int c = y.min_x; c <= y.max_x; ++c) {
        int b = y.bottom_at(c);
        if (b != none && env.ground_y - b <= cfg.contact_tolerance) contact(c);
      }
    if (base_max == INT_MIN) continue;

    const mask& m = y.placed.bits;
    double sum = 0;
    std::size_t count = 0;
    for (int yy = 0; yy < m.height(); ++yy)
      for (int xx = 0; xx < m.width(); ++xx)
        if (m.at(xx, yy)) {
          sum += y.placed.origin.x + xx + 0.5;
          ++count;
        }
    double com_x = sum / static_cast<double>(count);
    double margin = cfg.balance_margin * y.width();
    if (com_x < base_min - margin || com_x > base_max + margin)
      out.push_back({l.id, physics_rule::balance,
                     "centre of mass x=" + std::to_string(com_x) + " outside support base [" +
                         std::to_string(base_min) + ", " + std::to_string(base_max) + "]"});
  }
  return out;
}

std::vector<physics_violation> floating_layers(const environment& env,
                                               const support_graph& support) {
  std::vector<physics_violation> out;
  for (const auto& l : env.layers)
    if (l.visible && l.affected_by_gravity && !l.anchored &&
        !l.placed_amodal().tight_bounds().empty() && !support.is_supported(l.id))
      out.push_back({l.id, physics_rule::gravity, "unsupported and affected by gravity"});
  return out;
}

std::string_view to_string(physics_rule rule) {
  switch (rule) {
    case physics_rule::gravity: return "Gravity";
    case physics_rule::support: return "Support";
    case physics_rule::balance: return "Balance";
  }
  return "?";
}

nlohmann::json to_json(const physics_report& report) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : report.support.edges)
    edges.push_back({{"supported", e.supported}, {"supporter", e.supporter}});
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& f : report.generated)
    actions.push_back({{"action", "FALL"}, {"object_id", f.layer_id}, {"delta_y", f.delta_y}});
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations)
    violations.push_back(
        {{"layer_id", v.layer_id}, {"rule", to_string(v.rule)}, {"message", v.message}});
  return {{"support_edges", std::move(edges)},
          {"ground_supported", report.support.ground_supported},
          {"generated_actions", std::move(actions)},
          {"violations", std::move(violations)},
          {"affected_objects", report.affected_objects},
          {"iterations", report.iterations}};
}

}  // namespace strata
