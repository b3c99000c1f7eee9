#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "strata/scene.hpp"

namespace strata {

inline constexpr int bundle_version = 1;

// A scene bundle is a directory holding manifest.json plus PNG assets.
//
// Loading yields every layer visible (unless the manifest says otherwise),
// depth scores zeroed and the stacking set to manifest order. Call
// order_environment() to establish the real stacking.
environment load_bundle(const std::filesystem::path& dir);

// Writes manifest.json and assets into `dir` (created if needed). Current
// offsets, scales and photometric attributes are written to the manifest, so
// load_bundle(save_bundle(env)) reproduces every layer field and raster byte.
void save_bundle(const environment& env, const std::filesystem::path& dir);

struct violation {
  std::string subject;  // layer id, or "environment"
  std::string rule;
  std::string message;
  friend bool operator==(const violation&, const violation&) = default;
};

std::vector<violation> validate(const environment& env);

nlohmann::json to_json(const violation& v);

}  // namespace strata
