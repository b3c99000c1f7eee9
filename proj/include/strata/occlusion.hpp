#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strata/scene.hpp"

namespace strata {

// Dense square boolean matrix.
class bool_matrix {
 public:
  bool_matrix() = default;
  explicit bool_matrix(std::size_t n) : n_(n), cells_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool at(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v = true) {
    cells_[i * n_ + j] = v ? 1 : 0;
  }
  std::size_t row_count(std::size_t i) const;

  friend bool operator==(const bool_matrix&, const bool_matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Matrix semantics, indexed by position in `ids`:
//   hard(i, j) = 1  : i is occluded by j
//   soft(i, j) = 1  : the depth hints place i nearer than j
//   reach(i, j) = 1 : i is in front of j
struct hard_constraints {
  std::vector<std::string> ids;
  bool_matrix matrix;
  // Neither explicit pairs nor any visible mask were available; the matrix is
  // all zero and ordering falls back to soft constraints.
  bool missing_visible_masks = false;
};

struct soft_constraints {
  std::vector<std::string> ids;
  bool_matrix matrix;
  // depth_hint(j) - depth_hint(i) for every set entry; weaker edges are
  // dropped first when repairing cycles.
  std::vector<double> strength;
};

struct occlusion_graph {
  std::vector<std::string> ids;
  bool_matrix hard;
  bool_matrix soft;
  bool_matrix reach;
  std::vector<int> scores;
  // Soft edges (i, j) removed to break cycles, in removal order.
  std::vector<std::pair<std::size_t, std::size_t>> dropped_soft_edges;
};

// Ids are every layer of the environment in manifest order. Explicit
// occlusion pairs are used verbatim; otherwise hard(i, j) is set when some
// canvas pixel is hidden in i's amodal mask and visible in j.
hard_constraints derive_hard_constraints(const environment& env);

soft_constraints derive_soft_constraints(const environment& env, double margin);

// Builds the reachability graph from hard and soft constraints, repairs
// soft-induced cycles, closes transitively and scores each node by its
// out-degree. Throws hard_constraint_cycle when hard constraints alone are
// contradictory. `soft_strength` may be empty (all soft edges equally weak).
occlusion_graph propagate(const std::vector<std::string>& ids,
                          const bool_matrix& hard, const bool_matrix& soft,
                          const std::vector<double>& soft_strength = {});

// Sorts the visible layers by score, descending; ties by ascending depth
// hint (absent hints last), then by id. Writes scores into the layers and
// the permutation into env.stacking, and returns the permutation.
std::vector<std::string> stacking_order(const occlusion_graph& graph,
                                        environment& env);

// Full pipeline: derive, propagate, stack. Derived hard pairs are stored in
// env.occlusion so later re-ordering (e.g. after INSERT) sees the same
// constraints even once layers have moved.
occlusion_graph order_environment(environment& env);

nlohmann::json to_json(const occlusion_graph& graph,
                       const std::vector<std::string>& stacking);

}  // namespace strata
