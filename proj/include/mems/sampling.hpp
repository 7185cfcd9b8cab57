#pragma once

#include "mems/spectral_core.hpp"

#include <random>

namespace mems {

using Rng = std::mt19937_64;

// Random pinned function: Gaussian coefficients on the first `active` modes with k^-decay envelope,
// rescaled so that the spectral H^2 norm equals `radius`.
Vec random_pinned_modes(Rng& rng, int k_max, int active, double radius, double decay = 2.0);

inline double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

}  // namespace mems
