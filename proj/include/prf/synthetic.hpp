#pragma once

#include "prf/image.hpp"
#include "prf/noise_forge.hpp"

#include <cstddef>
#include <vector>

namespace prf {

// Procedural piecewise-smooth grayscale scene: illumination gradient, overlapping
// soft-edged shapes, oriented gratings and multi-octave value-noise texture.
// Values stay inside [0.05, 0.95]. Stands in for a natural-image corpus when none is
// supplied.
Image synthetic_scene(int width, int height, RngSeed seed);

std::vector<Image> synthetic_corpus(std::size_t count, int width, int height, RngSeed seed);

} // namespace prf
