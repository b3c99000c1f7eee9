#include "strata/scene.hpp"

#include <algorithm>
#include <cmath>

namespace strata {

vec2i object_layer::scaled_size() const {
  auto dim = [&](int n) {
    return std::max(1, static_cast<int>(std::floor(n * scale + 0.5)));
  };
  if (scale == 1.0) return {amodal.width(), amodal.height()};
  return {dim(amodal.width()), dim(amodal.height())};
}

rect object_layer::raster_rect() const {
  vec2i size = scaled_size();
  return {offset.x, offset.y, offset.x + size.x, offset.y + size.y};
}

placed_mask object_layer::placed_amodal() const {
  vec2i size = scaled_size();
  return {offset, resample(amodal_mask(), size.x, size.y)};
}

std::optional<placed_mask> object_layer::placed_visible() const {
  if (!visible_mask) return std::nullopt;
  vec2i size = scaled_size();
  return placed_mask{offset, resample(*visible_mask, size.x, size.y)};
}

rect object_layer::bbox() const {
  rect r = placed_amodal().tight_bounds();
  return r.empty() ? raster_rect() : r;
}

object_layer* environment::find(std::string_view id) {
  auto it = std::find_if(layers.begin(), layers.end(),
                         [&](const object_layer& l) { return l.id == id; });
  return it == layers.end() ? nullptr : &*it;
}

const object_layer* environment::find(std::string_view id) const {
  auto it = std::find_if(layers.begin(), layers.end(),
                         [&](const object_layer& l) { return l.id == id; });
  return it == layers.end() ? nullptr : &*it;
}

}  // namespace strata
