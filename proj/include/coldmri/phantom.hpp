#pragma once

#include <cstdint>
#include <vector>

#include "coldmri/image.hpp"

namespace coldmri {

/// Randomised elliptical phantom: an outer shell plus several random
/// ellipses, magnitude clipped to [0, 1], with a smooth linear phase ramp.
/// Deterministic in (height, width, seed).
ComplexImage make_phantom(int height, int width, std::uint64_t seed);

/// count phantoms seeded seed, seed + 1, ...
std::vector<ComplexImage> make_phantom_set(int height, int width, int count,
                                           std::uint64_t seed);

}  // namespace coldmri
