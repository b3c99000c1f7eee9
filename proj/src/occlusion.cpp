#include "strata/occlusion.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

#include "strata/error.hpp"

namespace strata {

std::size_t bool_matrix::row_count(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < n_; ++j) n += cells_[i * n_ + j];
  return n;
}

namespace {

std::vector<std::string> layer_ids(const environment& env) {
  std::vector<std::string> ids;
  ids.reserve(env.layers.size());
  for (const auto& l : env.layers) ids.push_back(l.id);
  return ids;
}

std::size_t index_of(const std::vector<std::string>& ids, const std::string& id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw error(errc::unknown_layer, "unknown layer '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

bool j_covers_hidden_part_of_i(const placed_mask& amodal_i,
                               const placed_mask& visible_i,
                               const placed_mask& visible_j) {
  rect area = intersect(amodal_i.bounds(), visible_j.bounds());
  for (int y = area.y0; y < area.y1; ++y)
    for (int x = area.x0; x < area.x1; ++x)
      if (amodal_i.at_canvas(x, y) && !visible_i.at_canvas(x, y) &&
          visible_j.at_canvas(x, y))
        return true;
  return false;
}

// Tarjan's algorithm; components are returned with members sorted and the
// list ordered by smallest member, so callers see a deterministic order.
std::vector<std::vector<std::size_t>> strongly_connected(const bool_matrix& g) {
  const std::size_t n = g.size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int counter = 0;

  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w = 0; w < n; ++w) {
      if (!g.at(v, w)) continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] < 0) visit(v);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace

hard_constraints derive_hard_constraints(const environment& env) {
  hard_constraints out;
  out.ids = layer_ids(env);
  const std::size_t n = out.ids.size();
  out.matrix = bool_matrix(n);

  if (env.occlusion) {
    for (const auto& p : *env.occlusion)
      out.matrix.set(index_of(out.ids, p.occluded), index_of(out.ids, p.occluder));
    return out;
  }

  std::vector<placed_mask> amodal(n);
  std::vector<std::optional<placed_mask>> visible(n);
  bool any_visible = false;
  for (std::size_t i = 0; i < n; ++i) {
    amodal[i] = env.layers[i].placed_amodal();
    visible[i] = env.layers[i].placed_visible();
    any_visible = any_visible || visible[i].has_value();
  }
  if (!any_visible) {
    out.missing_visible_masks = n > 0;
    return out;
  }
  // A layer without a visible mask has no known hidden pixels and cannot be
  // identified as an occluder.
  for (std::size_t i = 0; i < n; ++i) {
    if (!visible[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !visible[j]) continue;
      if (j_covers_hidden_part_of_i(amodal[i], *visible[i], *visible[j]))
        out.matrix.set(i, j);
    }
  }
  return out;
}

soft_constraints derive_soft_constraints(const environment& env, double margin) {
  soft_constraints out;
  out.ids = layer_ids(env);
  const std::size_t n = out.ids.size();
  out.matrix = bool_matrix(n);
  out.strength.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& hi = env.layers[i].depth_hint;
    if (!hi) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& hj = env.layers[j].depth_hint;
      if (i == j || !hj) continue;
      if (*hi + margin < *hj) {
        out.matrix.set(i, j);
        out.strength[i * n + j] = *hj - *hi;
      }
    }
  }
  return out;
}

occlusion_graph propagate(const std::vector<std::string>& ids,
                          const bool_matrix& hard, const bool_matrix& soft,
                          const std::vector<double>& soft_strength) {
  const std::size_t n = ids.size();
  if (hard.size() != n || soft.size() != n)
    throw error(errc::size_mismatch, "constraint matrices must be N x N");
  if (!soft_strength.empty() && soft_strength.size() != n * n)
    throw error(errc::size_mismatch, "soft strength must be N x N");
  for (std::size_t i = 0; i < n; ++i)
    if (hard.at(i, i) || soft.at(i, i))
      throw error(errc::invalid_parameter, "constraint matrices need a zero diagonal");

  occlusion_graph g;
  g.ids = ids;
  g.hard = hard;
  g.soft = soft;
  g.reach = bool_matrix(n);
  bool_matrix from_hard(n);

  // occlusion: j hides part of i, so j is in front of i
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (hard.at(i, j)) {
        g.reach.set(j, i);
        from_hard.set(j, i);
      }

  // depth, never against an established hard edge
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (soft.at(i, j) && !g.reach.at(j, i)) g.reach.set(i, j);

  // break cycles by dropping the weakest soft edge inside each cycle
  for (;;) {
    auto comps = strongly_connected(g.reach);
    auto cyclic = std::find_if(comps.begin(), comps.end(),
                               [](const auto& c) { return c.size() > 1; });
    if (cyclic == comps.end()) break;

    std::optional<std::pair<std::size_t, std::size_t>> weakest;
    double weakest_strength = 0.0;
    for (std::size_t a : *cyclic)
      for (std::size_t b : *cyclic) {
        if (!g.reach.at(a, b) || from_hard.at(a, b)) continue;
        double s = soft_strength.empty() ? 0.0 : soft_strength[a * n + b];
        // members are sorted, so the first minimum is the lexicographic one
        if (!weakest || s < weakest_strength) {
          weakest = {a, b};
          weakest_strength = s;
        }
      }
    if (!weakest) {
      std::string members;
      for (std::size_t k : *cyclic) members += (members.empty() ? "" : ", ") + ids[k];
      throw error(errc::hard_constraint_cycle,
                  "occlusion constraints form a cycle among {" + members + "}");
    }
    g.reach.set(weakest->first, weakest->second, false);
    g.dropped_soft_edges.push_back(*weakest);
  }

  // transitive closure: G <- G or (G * G) until nothing changes
  for (bool changed = true; changed;) {
    changed = false;
    bool_matrix next = g.reach;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        if (!g.reach.at(i, k)) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (g.reach.at(k, j) && !next.at(i, j)) {
            next.set(i, j);
            changed = true;
          }
      }
    g.reach = std::move(next);
  }
  for (std::size_t i = 0; i < n; ++i) g.reach.set(i, i, false);

  g.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.scores[i] = static_cast<int>(g.reach.row_count(i));
  return g;
}

std::vector<std::string> stacking_order(const occlusion_graph& graph,
                                        environment& env) {
  std::map<std::string, int> score;
  for (std::size_t i = 0; i < graph.ids.size(); ++i) score[graph.ids[i]] = graph.scores[i];

  std::vector<const object_layer*> visible;
  for (auto& l : env.layers) {
    if (auto it = score.find(l.id); it != score.end()) l.depth_score = it->second;
    if (l.visible) visible.push_back(&l);
  }
  std::sort(visible.begin(), visible.end(),
            [](const object_layer* a, const object_layer* b) {
              if (a->depth_score != b->depth_score) return a->depth_score > b->depth_score;
              if (a->depth_hint.has_value() != b->depth_hint.has_value())
                return a->depth_hint.has_value();
              if (a->depth_hint && *a->depth_hint != *b->depth_hint)
                return *a->depth_hint < *b->depth_hint;
              return a->id < b->id;
            });
  env.stacking.clear();
  for (const auto* l : visible) env.stacking.push_back(l->id);
  return env.stacking;
}

occlusion_graph order_environment(environment& env) {
  hard_constraints hard = derive_hard_constraints(env);
  soft_constraints soft = derive_soft_constraints(env, env.soft_margin);
  occlusion_graph graph = propagate(hard.ids, hard.matrix, soft.matrix, soft.strength);
  if (!env.occlusion) {
    std::vector<occlusion_pair> pairs;
    for (std::size_t i = 0; i < hard.ids.size(); ++i)
      for (std::size_t j = 0; j < hard.ids.size(); ++j)
        if (hard.matrix.at(i, j)) pairs.push_back({hard.ids[i], hard.ids[j]});
    env.occlusion = std::move(pairs);
  }
  stacking_order(graph, env);
  return graph;
}

namespace {

nlohmann::json matrix_json(const bool_matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m.at(i, j) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const occlusion_graph& graph,
                       const std::vector<std::string>& stacking) {
  nlohmann::json scores = nlohmann::json::object();
  for (std::size_t i = 0; i < graph.ids.size(); ++i) scores[graph.ids[i]] = graph.scores[i];
  nlohmann::json dropped = nlohmann::json::array();
  for (auto [i, j] : graph.dropped_soft_edges)
    dropped.push_back({graph.ids[i], graph.ids[j]});
  return {{"ids", graph.ids},
          {"hard", matrix_json(graph.hard)},
          {"soft", matrix_json(graph.soft)},
          {"reach", matrix_json(graph.reach)},
          {"scores", std::move(scores)},
          {"dropped_soft_edges", std::move(dropped)},
          {"stacking", stacking}};
}

}  // namespace strata
