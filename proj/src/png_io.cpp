#include "strata/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "strata/error.hpp"

namespace strata {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error(errc::missing_asset, "missing asset: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> decode(std::span<const std::uint8_t> bytes,
                                 std::uint32_t format, int& width,
                                 int& height) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw error(errc::io_failure,
                std::string("png decode failed: ") + image.message);
  image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw error(errc::io_failure,
                std::string("png decode failed: ") + image.message);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return pixels;
}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int width,
                                 int height, std::uint32_t format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr))
    throw error(errc::io_failure,
                std::string("png encode failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0,
                                 nullptr))
    throw error(errc::io_failure,
                std::string("png encode failed: ") + image.message);
  out.resize(size);
  return out;
}

}  // namespace

raster decode_png(std::span<const std::uint8_t> bytes) {
  int w = 0, h = 0;
  auto pixels = decode(bytes, PNG_FORMAT_RGBA, w, h);
  raster r(w, h);
  std::memcpy(r.bytes().data(), pixels.data(), pixels.size());
  return r;
}

raster read_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode_png(bytes);
  } catch (const error& e) {
    throw error(e.code(), path.string() + ": " + e.what());
  }
}

mask read_mask_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  int w = 0, h = 0;
  std::vector<std::uint8_t> gray;
  try {
    gray = decode(bytes, PNG_FORMAT_GRAY, w, h);
  } catch (const error& e) {
    throw error(e.code(), path.string() + ": " + e.what());
  }
  mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.set(x, y, gray[static_cast<std::size_t>(y) * w + x] >= 128);
  return m;
}

std::vector<std::uint8_t> encode_png(const raster& r) {
  return encode(r.bytes().data(), r.width(), r.height(), PNG_FORMAT_RGBA);
}

std::vector<std::uint8_t> encode_mask_png(const mask& m) {
  std::vector<std::uint8_t> gray(m.bits().size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = m.bits()[i] ? 255 : 0;
  return encode(gray.data(), m.width(), m.height(), PNG_FORMAT_GRAY);
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error(errc::io_failure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw error(errc::io_failure, "write failed: " + path.string());
}

void write_png(const std::filesystem::path& path, const raster& r) {
  write_file(path, encode_png(r));
}

void write_mask_png(const std::filesystem::path& path, const mask& m) {
  write_file(path, encode_mask_png(m));
}

}  // namespace strata
