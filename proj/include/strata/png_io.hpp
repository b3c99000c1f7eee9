#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "strata/image.hpp"

namespace strata {

// PNG codec over libpng's simplified API. A missing file throws missing_asset;
// undecodable data throws io_failure.
raster read_png(const std::filesystem::path& path);
raster decode_png(std::span<const std::uint8_t> bytes);

// Grayscale read thresholded at 128.
mask read_mask_png(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const raster& r);
std::vector<std::uint8_t> encode_mask_png(const mask& m);

void write_png(const std::filesystem::path& path, const raster& r);
void write_mask_png(const std::filesystem::path& path, const mask& m);

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace strata
