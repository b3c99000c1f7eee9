#include "strata/bundle.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "strata/error.hpp"
#include "strata/png_io.hpp"

namespace strata {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw error(errc::malformed_manifest, "malformed manifest: " + what);
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(ctx + " is missing '" + key + "'");
  return *it;
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) malformed(ctx + " must be an integer");
  return v.get<int>();
}

double as_number(const json& v, const std::string& ctx) {
  if (!v.is_number()) malformed(ctx + " must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& ctx) {
  if (!v.is_boolean()) malformed(ctx + " must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) malformed(ctx + " must be a string");
  return v.get<std::string>();
}

fs::path asset_path(const fs::path& dir, const std::string& rel) {
  fs::path p = dir / rel;
  if (!fs::exists(p)) throw error(errc::missing_asset, "missing asset: " + p.string());
  return p;
}

object_layer parse_layer(const json& entry, const fs::path& dir,
                         std::size_t index) {
  std::string ctx = "layers[" + std::to_string(index) + "]";
  if (!entry.is_object()) malformed(ctx + " must be an object");
  object_layer layer;
  layer.id = as_string(require(entry, "id", ctx), ctx + ".id");
  if (layer.id.empty()) malformed(ctx + ".id must be non-empty");
  ctx = "layer '" + layer.id + "'";
  layer.name = entry.contains("name") ? as_string(entry["name"], ctx + ".name")
                                      : layer.id;
  layer.amodal =
      read_png(asset_path(dir, as_string(require(entry, "amodal", ctx), ctx + ".amodal")));

  if (auto it = entry.find("visible_mask"); it != entry.end() && !it->is_null()) {
    mask vis = read_mask_png(asset_path(dir, as_string(*it, ctx + ".visible_mask")));
    if (vis.width() != layer.amodal.width() || vis.height() != layer.amodal.height())
      throw error(errc::mask_out_of_bounds,
                  ctx + ": visible_mask size differs from amodal raster");
    layer.visible_mask = std::move(vis);
  }

  const json& off = require(entry, "offset", ctx);
  if (!off.is_array() || off.size() != 2) malformed(ctx + ".offset must be [x, y]");
  layer.offset = {as_int(off[0], ctx + ".offset[0]"), as_int(off[1], ctx + ".offset[1]")};

  if (auto it = entry.find("depth_hint"); it != entry.end() && !it->is_null())
    layer.depth_hint = as_number(*it, ctx + ".depth_hint");
  if (auto it = entry.find("affected_by_gravity"); it != entry.end())
    layer.affected_by_gravity = as_bool(*it, ctx + ".affected_by_gravity");
  if (auto it = entry.find("anchored"); it != entry.end())
    layer.anchored = as_bool(*it, ctx + ".anchored");
  if (auto it = entry.find("visible"); it != entry.end())
    layer.visible = as_bool(*it, ctx + ".visible");
  if (auto it = entry.find("scale"); it != entry.end()) {
    layer.scale = as_number(*it, ctx + ".scale");
    if (!(layer.scale > 0) || !std::isfinite(layer.scale)) malformed(ctx + ".scale must be > 0");
  }
  if (auto it = entry.find("attributes"); it != entry.end()) {
    if (!it->is_object()) malformed(ctx + ".attributes must be an object");
    auto read = [&](const char* key, double& out) {
      if (auto f = it->find(key); f != it->end())
        out = as_number(*f, ctx + ".attributes." + key);
    };
    read("brightness", layer.attributes.brightness);
    read("contrast", layer.attributes.contrast);
    read("color", layer.attributes.color);
    read("sharpness", layer.attributes.sharpness);
  }
  return layer;
}

}  // namespace

environment load_bundle(const fs::path& dir) {
  fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw error(errc::missing_asset, "missing asset: " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!m.is_object()) malformed("top level must be an object");

  int version = as_int(require(m, "version", "manifest"), "version");
  if (version != bundle_version)
    throw error(errc::version_unsupported,
                "unsupported bundle version " + std::to_string(version));

  environment env;
  const json& canvas = require(m, "canvas", "manifest");
  if (!canvas.is_object()) malformed("canvas must be an object");
  env.canvas_width = as_int(require(canvas, "width", "canvas"), "canvas.width");
  env.canvas_height = as_int(require(canvas, "height", "canvas"), "canvas.height");
  if (env.canvas_width <= 0 || env.canvas_height <= 0) malformed("canvas size must be positive");

  env.background = read_png(
      asset_path(dir, as_string(require(m, "background", "manifest"), "background")));
  if (env.background.width() != env.canvas_width ||
      env.background.height() != env.canvas_height)
    malformed("background size differs from canvas");

  env.ground_y = env.canvas_height;
  if (auto it = m.find("ground_y"); it != m.end() && !it->is_null()) {
    env.ground_y = as_int(*it, "ground_y");
    if (env.ground_y < 0 || env.ground_y > env.canvas_height)
      malformed("ground_y outside [0, canvas height]");
  }

  const json& layers = m.contains("layers") ? m["layers"] : json::array();
  if (!layers.is_array()) malformed("layers must be an array");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    object_layer layer = parse_layer(layers[i], dir, i);
    if (!ids.insert(layer.id).second)
      throw error(errc::duplicate_layer_id, "duplicate layer id '" + layer.id + "'");
    if (layer.visible_mask) {
      mask amodal = layer.amodal_mask();
      for (int y = 0; y < amodal.height(); ++y)
        for (int x = 0; x < amodal.width(); ++x)
          if (layer.visible_mask->at(x, y) && !amodal.at(x, y))
            throw error(errc::mask_out_of_bounds,
                        "layer '" + layer.id + "': visible mask pixel (" +
                            std::to_string(x) + ", " + std::to_string(y) +
                            ") outside amodal mask");
    }
    env.layers.push_back(std::move(layer));
  }

  if (auto it = m.find("occlusion"); it != m.end() && !it->is_null()) {
    if (!it->is_array()) malformed("occlusion must be an array of pairs");
    std::vector<occlusion_pair> pairs;
    for (const json& p : *it) {
      if (!p.is_array() || p.size() != 2) malformed("occlusion entries must be [occluded, occluder]");
      occlusion_pair pair{as_string(p[0], "occlusion id"), as_string(p[1], "occlusion id")};
      if (!ids.count(pair.occluded) || !ids.count(pair.occluder))
        malformed("occlusion pair references unknown layer ('" + pair.occluded +
                  "', '" + pair.occluder + "')");
      if (pair.occluded == pair.occluder)
        malformed("occlusion pair relates '" + pair.occluded + "' to itself");
      pairs.push_back(std::move(pair));
    }
    env.occlusion = std::move(pairs);
  }

  if (auto it = m.find("constraints"); it != m.end()) env.constraints = *it;
  if (auto it = m.find("soft_margin"); it != m.end())
    env.soft_margin = as_number(*it, "soft_margin");

  for (const auto& layer : env.layers)
    if (layer.visible) env.stacking.push_back(layer.id);
  return env;
}

namespace {

std::string file_stem(std::size_t index, const std::string& id) {
  std::string safe;
  for (char c : id)
    safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return std::to_string(index) + "_" + safe;
}

}  // namespace

void save_bundle(const environment& env, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "layers", ec);
  if (ec) throw error(errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  json m;
  m["version"] = bundle_version;
  m["canvas"] = {{"width", env.canvas_width}, {"height", env.canvas_height}};
  m["background"] = "background.png";
  m["ground_y"] = env.ground_y;
  if (env.soft_margin != default_soft_margin) m["soft_margin"] = env.soft_margin;
  write_png(dir / "background.png", env.background);

  json layers = json::array();
  for (std::size_t i = 0; i < env.layers.size(); ++i) {
    const object_layer& l = env.layers[i];
    std::string stem = "layers/" + file_stem(i, l.id);
    json entry;
    entry["id"] = l.id;
    entry["name"] = l.name;
    entry["amodal"] = stem + ".png";
    write_png(dir / (stem + ".png"), l.amodal);
    if (l.visible_mask) {
      entry["visible_mask"] = stem + ".visible.png";
      write_mask_png(dir / (stem + ".visible.png"), *l.visible_mask);
    }
    entry["offset"] = {l.offset.x, l.offset.y};
    if (l.depth_hint) entry["depth_hint"] = *l.depth_hint;
    entry["affected_by_gravity"] = l.affected_by_gravity;
    entry["anchored"] = l.anchored;
    if (!l.visible) entry["visible"] = false;
    if (l.scale != 1.0) entry["scale"] = l.scale;
    if (!l.attributes.is_identity())
      entry["attributes"] = {{"brightness", l.attributes.brightness},
                             {"contrast", l.attributes.contrast},
                             {"color", l.attributes.color},
                             {"sharpness", l.attributes.sharpness}};
    layers.push_back(std::move(entry));
  }
  m["layers"] = std::move(layers);

  if (env.occlusion) {
    json pairs = json::array();
    for (const auto& p : *env.occlusion) pairs.push_back({p.occluded, p.occluder});
    m["occlusion"] = std::move(pairs);
  }
  if (!env.constraints.is_null()) m["constraints"] = env.constraints;

  std::string text = m.dump(2) + "\n";
  write_file(dir / "manifest.json",
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<violation> validate(const environment& env) {
  std::vector<violation> out;
  auto add = [&](std::string subject, std::string rule, std::string message) {
    out.push_back({std::move(subject), std::move(rule), std::move(message)});
  };

  if (env.canvas_width <= 0 || env.canvas_height <= 0)
    add("environment", "canvas size", "canvas width and height must be positive");
  if (env.background.width() != env.canvas_width ||
      env.background.height() != env.canvas_height)
    add("environment", "background size", "background raster must match the canvas");
  if (env.ground_y < 0 || env.ground_y > env.canvas_height)
    add("environment", "ground_y range", "ground_y must lie in [0, canvas height]");

  std::set<std::string> ids;
  for (const auto& l : env.layers) {
    if (l.id.empty()) add("<unnamed>", "layer id", "layer id must be non-empty");
    if (!ids.insert(l.id).second) add(l.id, "unique id", "layer id appears more than once");
    if (l.amodal.empty()) add(l.id, "raster size", "amodal raster must be non-empty");
    if (!(l.scale > 0) || !std::isfinite(l.scale)) add(l.id, "scale > 0", "scale must be positive");
    if (l.depth_score < 0) add(l.id, "depth_score >= 0", "depth score must be non-negative");
    for (double f : {l.attributes.brightness, l.attributes.contrast,
                     l.attributes.color, l.attributes.sharpness})
      if (!(f >= 0) || !std::isfinite(f)) {
        add(l.id, "attributes >= 0", "photometric factors must be finite and non-negative");
        break;
      }
    if (l.visible_mask) {
      if (l.visible_mask->width() != l.amodal.width() ||
          l.visible_mask->height() != l.amodal.height()) {
        add(l.id, "mask size", "visible mask size differs from amodal raster");
      } else {
        mask amodal = l.amodal_mask();
        std::size_t stray = 0;
        for (int y = 0; y < amodal.height(); ++y)
          for (int x = 0; x < amodal.width(); ++x)
            if (l.visible_mask->at(x, y) && !amodal.at(x, y)) ++stray;
        if (stray)
          add(l.id, "visible ⊄ amodal",
              std::to_string(stray) + " visible-mask pixels lie outside the amodal mask");
      }
    }
  }

  std::set<std::string> visible_ids;
  for (const auto& l : env.layers)
    if (l.visible) visible_ids.insert(l.id);
  std::set<std::string> seen;
  for (const auto& id : env.stacking) {
    if (!visible_ids.count(id))
      add(id, "stacking permutation", "stacking lists an id that is not a visible layer");
    else if (!seen.insert(id).second)
      add(id, "stacking permutation", "stacking lists the id more than once");
  }
  for (const auto& id : visible_ids)
    if (!seen.count(id))
      add(id, "stacking permutation", "visible layer missing from stacking");

  for (std::size_t k = 0; k + 1 < env.stacking.size(); ++k) {
    const auto* a = env.find(env.stacking[k]);
    const auto* b = env.find(env.stacking[k + 1]);
    if (a && b && a->depth_score < b->depth_score)
      add(a->id, "depth monotonicity",
          "D(" + a->id + ") = " + std::to_string(a->depth_score) + " < D(" + b->id +
              ") = " + std::to_string(b->depth_score) +
              " but it is stacked in front; stacking must be non-increasing in D");
  }

  if (env.occlusion)
    for (const auto& p : *env.occlusion)
      if (!ids.count(p.occluded) || !ids.count(p.occluder))
        add("environment", "occlusion ids",
            "occlusion pair (" + p.occluded + ", " + p.occluder + ") references an unknown layer");
  return out;
}

nlohmann::json to_json(const violation& v) {
  return {{"subject", v.subject}, {"rule", v.rule}, {"message", v.message}};
}

}  // namespace strata
