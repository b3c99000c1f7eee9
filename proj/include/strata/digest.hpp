#pragma once

#include <string>

#include "strata/scene.hpp"

namespace strata {

// SHA-256 (hex) over the scene content: canvas, background, every layer's
// raster, masks, transform, flags and attributes, the stacking and the
// occlusion pairs. The round counter is bookkeeping and is not hashed.
std::string state_digest(const environment& env);

}  // namespace strata
