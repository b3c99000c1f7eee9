#pragma once

// Brute-force reference for occlusion propagation: plain edge sets, cycle
// detection through Floyd-Warshall reachability, no SCC algorithm.

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "strata/error.hpp"
#include "strata/occlusion.hpp"
#include "support.hpp"

namespace strata::testing {

using edge_set = std::vector<std::vector<bool>>;

inline edge_set floyd_warshall(edge_set r) {
  const std::size_t n = r.size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  return r;
}

struct oracle_result {
  bool hard_cycle = false;
  edge_set reach;
  std::vector<int> degree;
  std::set<std::pair<std::size_t, std::size_t>> dropped;
};

inline oracle_result oracle_propagate(const bool_matrix& hard, const bool_matrix& soft,
                                      const std::vector<double>& strength) {
  const std::size_t n = hard.size();
  edge_set g(n, std::vector<bool>(n, false)), is_hard = g;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (hard.at(i, j)) g[j][i] = is_hard[j][i] = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (soft.at(i, j) && !g[j][i]) g[i][j] = true;

  oracle_result out;
  for (;;) {
    edge_set r = floyd_warshall(g);
    bool any = false;
    std::vector<bool> done(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i] || !r[i][i]) continue;
      any = true;
      std::vector<std::size_t> comp;
      for (std::size_t j = 0; j < n; ++j)
        if (j == i || (r[i][j] && r[j][i])) comp.push_back(j);
      for (auto c : comp) done[c] = true;
      std::optional<std::tuple<double, std::size_t, std::size_t>> best;
      for (auto a : comp)
        for (auto b : comp)
          if (g[a][b] && !is_hard[a][b]) {
            std::tuple<double, std::size_t, std::size_t> key{strength[a * n + b], a, b};
            if (!best || key < *best) best = key;
          }
      if (!best) {
        out.hard_cycle = true;
        return out;
      }
      g[std::get<1>(*best)][std::get<2>(*best)] = false;
      out.dropped.insert({std::get<1>(*best), std::get<2>(*best)});
    }
    if (!any) break;
  }
  out.reach = floyd_warshall(g);
  for (std::size_t i = 0; i < n; ++i) out.reach[i][i] = false;
  for (std::size_t i = 0; i < n; ++i)
    out.degree.push_back(static_cast<int>(std::count(out.reach[i].begin(), out.reach[i].end(), true)));
  return out;
}

struct random_instance {
  std::vector<std::string> ids;
  bool_matrix hard;
  bool_matrix soft;
  std::vector<double> strength;
  std::vector<std::optional<double>> hints;
};

inline random_instance make_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = static_cast<std::size_t>(size(rng));
  random_instance inst;
  inst.hard = bool_matrix(n);
  inst.soft = bool_matrix(n);
  inst.strength.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    inst.ids.push_back("n" + std::to_string(i));
    inst.hints.push_back(unit(rng) < 0.7 ? std::optional<double>(std::floor(unit(rng) * 4)) : std::nullopt);
  }
  // mostly consistent hard sets: respect a hidden order, with occasional
  // backward edges that may close a cycle
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  const double hard_p = unit(rng) * 0.4, soft_p = unit(rng) * 0.5, back_p = unit(rng) < 0.3 ? 0.05 : 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      std::size_t i = perm[a], j = perm[b];
      bool forward = a > b;  // j earlier in perm = nearer
      if (unit(rng) < (forward ? hard_p : back_p)) inst.hard.set(i, j);
      if (unit(rng) < soft_p) {
        inst.soft.set(i, j);
        // a few distinct strengths so ties happen
        inst.strength[i * n + j] = std::floor(unit(rng) * 3) * 0.5;
      }
    }
  return inst;
}

// Runs engine and oracle on one instance; returns a failure description or
// an empty string.
inline std::string check_instance(const random_instance& inst) {
  oracle_result want = oracle_propagate(inst.hard, inst.soft, inst.strength);
  occlusion_graph got;
  try {
    got = propagate(inst.ids, inst.hard, inst.soft, inst.strength);
  } catch (const error& e) {
    if (e.code() == errc::hard_constraint_cycle && want.hard_cycle) return {};
    return std::string("engine threw ") + e.what();
  }
  if (want.hard_cycle) return "engine accepted a hard-only cycle";
  const std::size_t n = inst.ids.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (got.reach.at(i, j) != want.reach[i][j])
        return "reach differs at (" + std::to_string(i) + ", " + std::to_string(j) + ")";
    if (got.scores[i] != want.degree[i]) return "score differs at " + std::to_string(i);
  }
  std::set<std::pair<std::size_t, std::size_t>> dropped(got.dropped_soft_edges.begin(),
                                                        got.dropped_soft_edges.end());
  if (dropped != want.dropped) return "different soft edges dropped";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (got.reach.at(i, j) && got.reach.at(j, i)) return "reach is cyclic";

  environment env = blank(8, 8);
  for (std::size_t i = 0; i < n; ++i) {
    object_layer l = box(inst.ids[i], 0, 0, 1, 1);
    l.depth_hint = inst.hints[i];
    add(env, std::move(l));
  }
  auto pi = stacking_order(got, env);
  if (pi.size() != n) return "stacking is not a permutation";
  std::vector<std::size_t> pos(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t idx = std::stoul(pi[k].substr(1));
    pos[idx] = k;
    if (k + 1 < n && env.find(pi[k])->depth_score < env.find(pi[k + 1])->depth_score)
      return "stacking violates monotonicity";
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (inst.hard.at(i, j) && !(pos[j] < pos[i])) return "hard constraint overridden";
  return {};
}

}  // namespace strata::testing
