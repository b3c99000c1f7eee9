#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "strata/image.hpp"

namespace strata {

// Photometric state accumulated by RETOUCH. 1.0 is the identity for each.
struct photometric {
  double brightness = 1.0;
  double contrast = 1.0;
  double color = 1.0;
  double sharpness = 1.0;

  bool is_identity() const {
    return brightness == 1.0 && contrast == 1.0 && color == 1.0 &&
           sharpness == 1.0;
  }
  friend bool operator==(const photometric&, const photometric&) = default;
};

struct object_layer {
  std::string id;
  std::string name;
  raster amodal;                     // completed appearance, native size
  std::optional<mask> visible_mask;  // layer-local, same size as amodal
  vec2i offset;                      // top-left of the scaled raster
  std::optional<double> depth_hint;  // smaller = nearer the camera
  int depth_score = 0;
  double scale = 1.0;
  bool visible = true;
  bool affected_by_gravity = true;
  bool anchored = false;
  photometric attributes;

  mask amodal_mask() const { return alpha_mask(amodal); }

  // Size of the raster after applying `scale`; never smaller than 1x1.
  vec2i scaled_size() const;
  rect raster_rect() const;

  // Transformed masks in canvas coordinates.
  placed_mask placed_amodal() const;
  std::optional<placed_mask> placed_visible() const;

  // Tight box of the transformed amodal mask, or the raster rect for a layer
  // with no opaque pixel.
  rect bbox() const;
};

struct occlusion_pair {
  std::string occluded;
  std::string occluder;
  friend bool operator==(const occlusion_pair&, const occlusion_pair&) = default;
};

inline constexpr double default_soft_margin = 0.05;

// Live scene state: layers over a pre-repaired background.
struct environment {
  int canvas_width = 0;
  int canvas_height = 0;
  raster background;
  std::vector<object_layer> layers;   // manifest order
  std::vector<std::string> stacking;  // visible ids, front-most first
  int ground_y = 0;
  int round = 0;
  // Hard occlusion pairs: either authored in the bundle or derived from
  // visible masks when the scene is first ordered.
  std::optional<std::vector<occlusion_pair>> occlusion;
  double soft_margin = default_soft_margin;
  nlohmann::json constraints;  // raw `constraints` manifest field, or null

  object_layer* find(std::string_view id);
  const object_layer* find(std::string_view id) const;
  rect canvas_rect() const { return {0, 0, canvas_width, canvas_height}; }
};

}  // namespace strata
