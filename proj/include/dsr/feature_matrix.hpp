#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsr/errors.hpp"

namespace dsr {

// Row-major L x D matrix of 32-bit floats, one row per frame.
struct FeatureMatrix {
    std::uint64_t n_frames = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;

    std::span<const float> row(std::uint64_t t) const {
        return {data.data() + t * dim, dim};
    }
    std::span<float> row(std::uint64_t t) {
        return {data.data() + t * dim, dim};
    }

    // Throws ValidationError if sizes disagree or any element is non-finite.
    void validate() const;
};

} // namespace dsr
