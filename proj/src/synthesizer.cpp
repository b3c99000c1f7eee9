#include "strata/synthesizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "strata/error.hpp"

namespace strata {

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

raster null_synthesizer::edit(const raster&, const std::string&, const std::string&) {
  throw error(errc::synthesizer_unavailable, "no synthesizer configured for EDIT");
}

raster null_synthesizer::generate(const std::string&, int, int) {
  throw error(errc::synthesizer_unavailable, "no synthesizer configured for INSERT");
}

namespace {

using rgb = std::array<double, 3>;

rgb rotate_hue(rgb c, double degrees) {
  double mx = std::max({c[0], c[1], c[2]}), mn = std::min({c[0], c[1], c[2]});
  double delta = mx - mn;
  if (delta == 0) return c;
  double h;
  if (mx == c[0]) h = std::fmod((c[1] - c[2]) / delta, 6.0);
  else if (mx == c[1]) h = (c[2] - c[0]) / delta + 2.0;
  else h = (c[0] - c[1]) / delta + 4.0;
  h = std::fmod(h * 60.0 + degrees + 720.0, 360.0);
  double s = delta / mx, v = mx;
  double chroma = v * s;
  double x = chroma * (1 - std::fabs(std::fmod(h / 60.0, 2.0) - 1));
  double m = v - chroma;
  rgb out;
  switch (static_cast<int>(h / 60.0) % 6) {
    case 0: out = {chroma, x, 0}; break;
    case 1: out = {x, chroma, 0}; break;
    case 2: out = {0, chroma, x}; break;
    case 3: out = {0, x, chroma}; break;
    case 4: out = {x, 0, chroma}; break;
    default: out = {chroma, 0, x}; break;
  }
  for (double& v2 : out) v2 += m;
  return out;
}

std::uint8_t to8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
}

rgba color_from(std::uint64_t h) {
  return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
          static_cast<std::uint8_t>(h >> 16), 255};
}

}  // namespace

raster stub_synthesizer::edit(const raster& current, const std::string& prompt,
                              const std::string& edit_type) {
  const std::uint64_t h = fnv1a(prompt, fnv1a(edit_type, 0xcbf29ce484222325ULL ^ seed_));
  raster out = current;
  if (edit_type == "recolor") {
    double degrees = 30.0 + static_cast<double>(h % 300);
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        rgba p = current.at(x, y);
        if (p.a == 0) continue;
        rgb c = rotate_hue({p.r / 255.0, p.g / 255.0, p.b / 255.0}, degrees);
        out.set(x, y, {to8(c[0]), to8(c[1]), to8(c[2]), p.a});
      }
  } else if (edit_type == "texture") {
    int cell = 3 + static_cast<int>(h % 5);
    rgba a = color_from(h >> 8), b = color_from(h >> 32);
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        rgba p = current.at(x, y);
        if (p.a == 0) continue;
        rgba t = ((x / cell + y / cell) % 2) ? a : b;
        double luma = (0.2126 * p.r + 0.7152 * p.g + 0.0722 * p.b) / 255.0;
        double k = 0.5 + 0.5 * luma;
        out.set(x, y, {to8(t.r / 255.0 * k), to8(t.g / 255.0 * k), to8(t.b / 255.0 * k), p.a});
      }
  } else if (edit_type == "style") {
    rgba tint = color_from(h);
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        rgba p = current.at(x, y);
        if (p.a == 0) continue;
        auto post = [](std::uint8_t v, std::uint8_t t) {
          double q = std::floor(v / 64.0) / 3.0;
          return to8(0.75 * q + 0.25 * (t / 255.0));
        };
        out.set(x, y, {post(p.r, tint.r), post(p.g, tint.g), post(p.b, tint.b), p.a});
      }
  } else {
    throw error(errc::invalid_parameter,
                "edit_type '" + edit_type + "' is not supported by the stub synthesizer");
  }
  return out;
}

raster stub_synthesizer::generate(const std::string& prompt, int width, int height) {
  if (width <= 0 || height <= 0) throw error(errc::invalid_parameter, "insert size must be positive");
  const std::uint64_t h = fnv1a(prompt, 0xcbf29ce484222325ULL ^ seed_);
  rgba fill = color_from(h);
  raster out(width, height);
  const double radius = std::min(width, height) / 4.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double px = x + 0.5, py = y + 0.5;
      double cx = std::clamp(px, radius, width - radius);
      double cy = std::clamp(py, radius, height - radius);
      double dx = px - cx, dy = py - cy;
      if (dx * dx + dy * dy <= radius * radius) out.set(x, y, fill);
    }
  return out;
}

}  // namespace strata
