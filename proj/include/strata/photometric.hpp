#pragma once

#include "strata/image.hpp"
#include "strata/scene.hpp"

namespace strata {

// Applies, in order: brightness (rgb * b), contrast ((rgb - 0.5) * c + 0.5),
// saturation (gray + s * (rgb - gray), Rec.709 luma) and sharpness
// (blur + k * (rgb - blur), 3x3 box blur, edges clamped). Each stage clamps to
// [0, 1]; a factor of exactly 1.0 skips its stage. Alpha is untouched.
raster apply_photometric(const raster& src, const photometric& p);

}  // namespace strata
