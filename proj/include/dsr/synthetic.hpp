#pragma once

#include <cstdint>

#include "dsr/feature_matrix.hpp"

namespace dsr {

// Seeded Gaussian-mixture generator with a controllable target correlation
// between the designated dimension pairs (2i, 2i+1). The population
// correlation matrix of the output is exactly block-diagonal: `correlation`
// on designated pairs, zero everywhere else off the diagonal.
struct SynthSpec {
    std::uint32_t dim = 8;
    std::uint64_t n_frames = 0;
    std::uint32_t n_modes = 1;
    double correlation = 0.0; // in [0, 1]
    std::uint64_t seed = 0;
    // Per-dimension std-dev of the mixture component means, relative to a
    // unit within-component noise.
    double mode_spread = 1.5;
};

// Pure function of the spec; cost O(n_frames * dim^2).
FeatureMatrix generate_synthetic(const SynthSpec& spec);

} // namespace dsr
