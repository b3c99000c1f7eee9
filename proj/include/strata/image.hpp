#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace strata {

struct vec2i {
  int x = 0;
  int y = 0;
  friend bool operator==(const vec2i&, const vec2i&) = default;
};

// Half-open integer rectangle [x0, x1) x [y0, y1).
struct rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  friend bool operator==(const rect&, const rect&) = default;
};

rect intersect(const rect& a, const rect& b);
rect unite(const rect& a, const rect& b);

struct rgba {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 0;
  friend bool operator==(const rgba&, const rgba&) = default;
};

// 8-bit RGBA, straight alpha, row-major.
class raster {
 public:
  raster() = default;
  raster(int width, int height, rgba fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  rgba at(int x, int y) const;
  void set(int x, int y, rgba px);

  std::span<std::uint8_t> bytes() { return data_; }
  std::span<const std::uint8_t> bytes() const { return data_; }

  friend bool operator==(const raster&, const raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

class mask {
 public:
  mask() = default;
  mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::size_t popcount() const;
  mask complement() const;

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const mask&, const mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// alpha > 0
mask alpha_mask(const raster& r);

// Resampling. Color channels are bilinear; alpha is nearest-neighbour so the
// coverage of a scaled raster equals the nearest-scaled mask exactly.
raster resample(const raster& src, int width, int height);
mask resample(const mask& src, int width, int height);

// A mask positioned in canvas coordinates. Coordinates may fall outside the
// canvas; clipping is the consumer's job.
struct placed_mask {
  vec2i origin;
  mask bits;

  rect bounds() const {
    return {origin.x, origin.y, origin.x + bits.width(),
            origin.y + bits.height()};
  }
  bool at_canvas(int x, int y) const;
  // Tight bounding box of set pixels; empty rect when no pixel is set.
  rect tight_bounds() const;
};

struct placed_raster {
  vec2i origin;
  raster pixels;
};

}  // namespace strata
