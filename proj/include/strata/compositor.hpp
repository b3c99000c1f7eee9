#pragma once

#include <optional>
#include <set>
#include <string>

#include "strata/image.hpp"
#include "strata/scene.hpp"

namespace strata {

struct render_options {
  // Layers to outline with their bounding box (debug aid).
  std::set<std::string> highlight;
  // Crop the output to this canvas sub-rectangle.
  std::optional<rect> region;
};

// A layer scaled to its current size and photometrically adjusted, placed at
// its offset.
placed_raster render_layer(const object_layer& layer);

// Straight-alpha over: out = src * a + dst * (1 - a), 8-bit with
// round-half-up. Pixels outside `dst` are dropped.
void blend_over(raster& dst, const placed_raster& src);

// Background first, then the stacking back to front. Throws invalid_stacking
// when the stacking is not a permutation of the visible layers or is not
// non-increasing in depth score.
raster composite(const environment& env, const render_options& opts = {});

// Canvas-sized union of the transformed amodal masks of `ids`. Throws
// unknown_layer.
mask composite_mask(const environment& env, const std::set<std::string>& ids);

}  // namespace strata
