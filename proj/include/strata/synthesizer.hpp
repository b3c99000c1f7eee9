#pragma once

#include <cstdint>
#include <string>

#include "strata/image.hpp"

namespace strata {

struct synthesizer_caps {
  bool can_edit = false;
  bool can_insert = false;
};

// Generator backend for EDIT and INSERT. Outputs are RGBA rasters whose alpha
// defines the object's amodal mask; implementations must be deterministic for
// a fixed prompt and seed.
class synthesizer {
 public:
  virtual ~synthesizer() = default;
  virtual synthesizer_caps capabilities() const = 0;
  // Rewrites `current` under its existing alpha.
  virtual raster edit(const raster& current, const std::string& prompt,
                      const std::string& edit_type) = 0;
  virtual raster generate(const std::string& prompt, int width, int height) = 0;
};

// No generator configured; EDIT and INSERT are rejected.
class null_synthesizer final : public synthesizer {
 public:
  synthesizer_caps capabilities() const override { return {}; }
  raster edit(const raster&, const std::string&, const std::string&) override;
  raster generate(const std::string&, int, int) override;
};

// Procedural stand-in seeded by (seed, prompt):
//   recolor  hue rotation
//   texture  tiled checker modulated by the original luminance
//   style    posterized to four levels per channel, then tinted
// INSERT produces a solid rounded rectangle.
class stub_synthesizer final : public synthesizer {
 public:
  explicit stub_synthesizer(std::uint64_t seed = 0) : seed_(seed) {}

  synthesizer_caps capabilities() const override { return {true, true}; }
  raster edit(const raster& current, const std::string& prompt,
              const std::string& edit_type) override;
  raster generate(const std::string& prompt, int width, int height) override;

 private:
  std::uint64_t seed_;
};

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace strata
