#include "strata/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace strata {

rect intersect(const rect& a, const rect& b) {
  rect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
         std::min(a.y1, b.y1)};
  if (r.empty()) return {};
  return r;
}

rect unite(const rect& a, const rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

raster::raster(int width, int height, rgba fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative raster size");
  data_.resize(static_cast<std::size_t>(width) * height * 4);
  for (std::size_t i = 0; i < data_.size(); i += 4) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
    data_[i + 3] = fill.a;
  }
}

rgba raster::at(int x, int y) const {
  const auto* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 4];
  return {p[0], p[1], p[2], p[3]};
}

void raster::set(int x, int y, rgba px) {
  auto* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 4];
  p[0] = px.r;
  p[1] = px.g;
  p[2] = px.b;
  p[3] = px.a;
}

mask::mask(int width, int height, bool fill)
    : width_(width),
      height_(height),
      bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative mask size");
}

std::size_t mask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

mask mask::complement() const {
  mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

mask alpha_mask(const raster& r) {
  mask m(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) m.set(x, y, r.at(x, y).a > 0);
  return m;
}

namespace {

// Nearest source index for destination index i, sampling pixel centres.
int nearest_index(int i, int src_len, int dst_len) {
  long long v = (2LL * i + 1) * src_len / (2LL * dst_len);
  return static_cast<int>(std::min<long long>(v, src_len - 1));
}

std::uint8_t round_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

raster resample(const raster& src, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resample to empty size");
  if (width == src.width() && height == src.height()) return src;
  raster out(width, height);
  const double sx_ratio = static_cast<double>(src.width()) / width;
  const double sy_ratio = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    double sy = std::clamp((y + 0.5) * sy_ratio - 0.5, 0.0,
                           static_cast<double>(src.height() - 1));
    int y0 = static_cast<int>(std::floor(sy));
    int y1 = std::min(y0 + 1, src.height() - 1);
    double fy = sy - y0;
    int ny = nearest_index(y, src.height(), height);
    for (int x = 0; x < width; ++x) {
      double sx = std::clamp((x + 0.5) * sx_ratio - 0.5, 0.0,
                             static_cast<double>(src.width() - 1));
      int x0 = static_cast<int>(std::floor(sx));
      int x1 = std::min(x0 + 1, src.width() - 1);
      double fx = sx - x0;
      rgba p00 = src.at(x0, y0), p10 = src.at(x1, y0);
      rgba p01 = src.at(x0, y1), p11 = src.at(x1, y1);
      auto lerp2 = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c,
                       std::uint8_t d) {
        double top = a + (b - a) * fx;
        double bottom = c + (d - c) * fx;
        return round_channel(top + (bottom - top) * fy);
      };
      rgba px;
      px.r = lerp2(p00.r, p10.r, p01.r, p11.r);
      px.g = lerp2(p00.g, p10.g, p01.g, p11.g);
      px.b = lerp2(p00.b, p10.b, p01.b, p11.b);
      px.a = src.at(nearest_index(x, src.width(), width), ny).a;
      out.set(x, y, px);
    }
  }
  return out;
}

mask resample(const mask& src, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resample to empty size");
  if (width == src.width() && height == src.height()) return src;
  mask out(width, height);
  for (int y = 0; y < height; ++y) {
    int sy = nearest_index(y, src.height(), height);
    for (int x = 0; x < width; ++x)
      out.set(x, y, src.at(nearest_index(x, src.width(), width), sy));
  }
  return out;
}

bool placed_mask::at_canvas(int x, int y) const {
  int lx = x - origin.x;
  int ly = y - origin.y;
  if (lx < 0 || ly < 0 || lx >= bits.width() || ly >= bits.height()) return false;
  return bits.at(lx, ly);
}

rect placed_mask::tight_bounds() const {
  int minx = bits.width(), miny = bits.height(), maxx = -1, maxy = -1;
  for (int y = 0; y < bits.height(); ++y)
    for (int x = 0; x < bits.width(); ++x)
      if (bits.at(x, y)) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
  if (maxx < 0) return {};
  return {origin.x + minx, origin.y + miny, origin.x + maxx + 1,
          origin.y + maxy + 1};
}

}  // namespace strata
