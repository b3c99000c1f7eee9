#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "strata/scene.hpp"

namespace strata::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(STRATA_FIXTURE_DIR) / name;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("strata_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline environment blank(int w, int h, rgba bg = {200, 200, 200, 255}) {
  environment env;
  env.canvas_width = w;
  env.canvas_height = h;
  env.background = raster(w, h, bg);
  env.ground_y = h;
  return env;
}

// Solid opaque w x h layer whose visible mask is the whole raster.
inline object_layer box(const std::string& id, int x, int y, int w, int h,
                        rgba color = {200, 40, 40, 255},
                        std::optional<double> hint = std::nullopt) {
  object_layer l;
  l.id = id;
  l.name = id;
  l.amodal = raster(w, h, color);
  l.visible_mask = mask(w, h, true);
  l.offset = {x, y};
  l.depth_hint = hint;
  return l;
}

// Adds the layer and appends it to the stacking (callers order afterwards).
inline object_layer& add(environment& env, object_layer l) {
  env.stacking.push_back(l.id);
  env.layers.push_back(std::move(l));
  return env.layers.back();
}

}  // namespace strata::testing
