#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dsr/feature_matrix.hpp"

namespace dsr {

struct Codebook {
    std::uint32_t n_centroids = 0;
    std::uint32_t dim = 0;
    std::vector<float> centroids; // row-major, n_centroids x dim

    std::span<const float> centroid(std::uint32_t u) const {
        return {centroids.data() + static_cast<std::size_t>(u) * dim, dim};
    }
    void validate() const;
};

enum class KmeansInit : std::uint8_t { kmeanspp = 0, random = 1 };

struct KmeansConfig {
    std::uint32_t n_centroids = 2000;
    KmeansInit init = KmeansInit::kmeanspp;
    std::uint32_t max_iters = 100;
    double rel_tol = 1e-4;
    std::uint64_t seed = 0;
    // Assignment may be parallelized over frames; results are bit-identical
    // for any thread count (reductions always run in frame order).
    int threads = 1;
};

struct KmeansFitReport {
    double final_inertia = 0.0;
    std::uint32_t iterations_run = 0;
    std::vector<double> inertia_history; // non-increasing
};

// Lloyd's algorithm with kmeans++ or random (distinct rows) initialization.
// Deterministic for fixed (data, cfg). Distances accumulate in 64-bit.
std::pair<Codebook, KmeansFitReport> train_kmeans(const FeatureMatrix& data,
                                                  const KmeansConfig& cfg);

// Nearest-centroid token; ties break to the lowest index.
std::uint32_t assign(std::span<const float> x, const Codebook& cb);

std::vector<std::uint32_t> assign_batch(const FeatureMatrix& m, const Codebook& cb,
                                        int threads = 1);

// Sum of squared distances of every frame to its nearest centroid.
double inertia(const FeatureMatrix& m, const Codebook& cb, int threads = 1);

} // namespace dsr
