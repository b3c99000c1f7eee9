#include "strata/photometric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace strata {

raster apply_photometric(const raster& src, const photometric& p) {
  if (p.is_identity()) return src;
  const int w = src.width(), h = src.height();
  std::vector<std::array<double, 3>> px(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      rgba c = src.at(x, y);
      px[static_cast<std::size_t>(y) * w + x] = {c.r / 255.0, c.g / 255.0, c.b / 255.0};
    }
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  for (auto& c : px) {
    if (p.brightness != 1.0)
      for (double& v : c) v = clamp01(v * p.brightness);
    if (p.contrast != 1.0)
      for (double& v : c) v = clamp01((v - 0.5) * p.contrast + 0.5);
    if (p.color != 1.0) {
      double gray = 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2];
      for (double& v : c) v = clamp01(gray + p.color * (v - gray));
    }
  }

  if (p.sharpness != 1.0) {
    std::vector<std::array<double, 3>> blurred(px.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::array<double, 3> sum{};
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int sx = std::clamp(x + dx, 0, w - 1);
            int sy = std::clamp(y + dy, 0, h - 1);
            const auto& s = px[static_cast<std::size_t>(sy) * w + sx];
            for (int k = 0; k < 3; ++k) sum[k] += s[k];
          }
        for (int k = 0; k < 3; ++k) blurred[static_cast<std::size_t>(y) * w + x][k] = sum[k] / 9.0;
      }
    for (std::size_t i = 0; i < px.size(); ++i)
      for (int k = 0; k < 3; ++k)
        px[i][k] = clamp01(blurred[i][k] + p.sharpness * (px[i][k] - blurred[i][k]));
  }

  raster out = src;
  auto to8 = [](double v) { return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& c = px[static_cast<std::size_t>(y) * w + x];
      out.set(x, y, {to8(c[0]), to8(c[1]), to8(c[2]), src.at(x, y).a});
    }
  return out;
}

}  // namespace strata
