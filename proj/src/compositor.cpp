#include "strata/compositor.hpp"

#include <algorithm>

#include "strata/error.hpp"
#include "strata/photometric.hpp"

namespace strata {

placed_raster render_layer(const object_layer& layer) {
  vec2i size = layer.scaled_size();
  raster scaled = resample(layer.amodal, size.x, size.y);
  return {layer.offset, apply_photometric(scaled, layer.attributes)};
}

void blend_over(raster& dst, const placed_raster& src) {
  rect area = intersect(
      {0, 0, dst.width(), dst.height()},
      {src.origin.x, src.origin.y, src.origin.x + src.pixels.width(),
       src.origin.y + src.pixels.height()});
  for (int y = area.y0; y < area.y1; ++y)
    for (int x = area.x0; x < area.x1; ++x) {
      rgba s = src.pixels.at(x - src.origin.x, y - src.origin.y);
      if (s.a == 0) continue;
      if (s.a == 255) {
        dst.set(x, y, s);
        continue;
      }
      rgba d = dst.at(x, y);
      const unsigned a = s.a, ia = 255 - s.a;
      auto mix = [&](unsigned sc, unsigned dc) {
        return static_cast<std::uint8_t>((sc * a + dc * ia + 127) / 255);
      };
      dst.set(x, y,
              {mix(s.r, d.r), mix(s.g, d.g), mix(s.b, d.b),
               static_cast<std::uint8_t>((a * 255 + d.a * ia + 127) / 255)});
    }
}

namespace {

void check_stacking(const environment& env) {
  std::set<std::string> seen;
  for (const auto& id : env.stacking) {
    const object_layer* l = env.find(id);
    if (!l || !l->visible || !seen.insert(id).second)
      throw error(errc::invalid_stacking,
                  "stacking entry '" + id + "' is not a distinct visible layer");
  }
  for (const auto& l : env.layers)
    if (l.visible && !seen.count(l.id))
      throw error(errc::invalid_stacking, "visible layer '" + l.id + "' is not stacked");
  for (std::size_t k = 0; k + 1 < env.stacking.size(); ++k)
    if (env.find(env.stacking[k])->depth_score < env.find(env.stacking[k + 1])->depth_score)
      throw error(errc::invalid_stacking, "stacking violates depth-score monotonicity at '" +
                                              env.stacking[k] + "'");
}

void outline(raster& dst, const rect& r) {
  const rgba magenta{255, 0, 255, 255};
  rect c = intersect(r, {0, 0, dst.width(), dst.height()});
  if (c.empty()) return;
  for (int x = c.x0; x < c.x1; ++x) {
    dst.set(x, c.y0, magenta);
    dst.set(x, c.y1 - 1, magenta);
  }
  for (int y = c.y0; y < c.y1; ++y) {
    dst.set(c.x0, y, magenta);
    dst.set(c.x1 - 1, y, magenta);
  }
}

}  // namespace

raster composite(const environment& env, const render_options& opts) {
  check_stacking(env);
  raster out = env.background;
  for (auto it = env.stacking.rbegin(); it != env.stacking.rend(); ++it)
    blend_over(out, render_layer(*env.find(*it)));
  for (const auto& id : opts.highlight) {
    const object_layer* l = env.find(id);
    if (!l) throw error(errc::unknown_layer, "unknown layer '" + id + "'");
    if (l->visible) outline(out, l->bbox());
  }
  if (!opts.region) return out;

  rect r = *opts.region;
  if (r.empty() || r.x0 < 0 || r.y0 < 0 || r.x1 > out.width() || r.y1 > out.height())
    throw error(errc::invalid_parameter, "render region must lie within the canvas");
  raster cropped(r.width(), r.height());
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) cropped.set(x - r.x0, y - r.y0, out.at(x, y));
  return cropped;
}

mask composite_mask(const environment& env, const std::set<std::string>& ids) {
  mask out(env.canvas_width, env.canvas_height);
  for (const auto& id : ids) {
    const object_layer* l = env.find(id);
    if (!l) throw error(errc::unknown_layer, "unknown layer '" + id + "'");
    placed_mask pm = l->placed_amodal();
    rect area = intersect(pm.bounds(), env.canvas_rect());
    for (int y = area.y0; y < area.y1; ++y)
      for (int x = area.x0; x < area.x1; ++x)
        if (pm.at_canvas(x, y)) out.set(x, y, true);
  }
  return out;
}

}  // namespace strata
