#include "strata/digest.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <memory>

#include "strata/error.hpp"

namespace strata {

namespace {

class hasher {
 public:
  hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw error(errc::io_failure, "sha256 init failed");
  }

  void bytes(const void* data, std::size_t n) {
    EVP_DigestUpdate(ctx_.get(), data, n);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

void hash_raster(hasher& h, const raster& r) {
  h.i64(r.width());
  h.i64(r.height());
  h.bytes(r.bytes().data(), r.bytes().size());
}

}  // namespace

std::string state_digest(const environment& env) {
  hasher h;
  h.i64(env.canvas_width);
  h.i64(env.canvas_height);
  h.i64(env.ground_y);
  h.f64(env.soft_margin);
  hash_raster(h, env.background);
  h.u64(env.layers.size());
  for (const auto& l : env.layers) {
    h.str(l.id);
    h.str(l.name);
    hash_raster(h, l.amodal);
    h.u64(l.visible_mask ? 1 : 0);
    if (l.visible_mask) {
      h.i64(l.visible_mask->width());
      h.i64(l.visible_mask->height());
      h.bytes(l.visible_mask->bits().data(), l.visible_mask->bits().size());
    }
    h.i64(l.offset.x);
    h.i64(l.offset.y);
    h.u64(l.depth_hint ? 1 : 0);
    if (l.depth_hint) h.f64(*l.depth_hint);
    h.i64(l.depth_score);
    h.f64(l.scale);
    h.u64((l.visible ? 1u : 0u) | (l.affected_by_gravity ? 2u : 0u) |
          (l.anchored ? 4u : 0u));
    h.f64(l.attributes.brightness);
    h.f64(l.attributes.contrast);
    h.f64(l.attributes.color);
    h.f64(l.attributes.sharpness);
  }
  h.u64(env.stacking.size());
  for (const auto& id : env.stacking) h.str(id);
  h.u64(env.occlusion ? env.occlusion->size() + 1 : 0);
  if (env.occlusion)
    for (const auto& p : *env.occlusion) {
      h.str(p.occluded);
      h.str(p.occluder);
    }
  return h.hex();
}

}  // namespace strata
