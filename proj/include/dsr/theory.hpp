#pragma once

#include <cstdint>
#include <vector>

#include "dsr/feature_matrix.hpp"
#include "dsr/kmeans.hpp"

namespace dsr {

struct TheoryParams {
    std::uint32_t n_subspaces = 1; // M
    double rho = 0.0;              // in [0, 1]
    double sigma2 = 1.0;           // per-dimension centroid variance
    std::uint64_t n_trials = 1;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ErrorReport {
    double empirical_error = 0.0;
    double predicted_error = 0.0;
    double bias2 = 0.0;
    double variance = 0.0;
    double rel_gap = 0.0;
};

// 1/M + (1 - 1/M) * rho: the ratio of the ensemble-average estimation error
// to that of a single quantizer.
double predicted_error_factor(std::uint32_t M, double rho);

// alpha / (2 - alpha): sub-quantizer correlation approximated through the
// expected Jaccard similarity of the dimension subsets.
double predicted_rho(double alpha);

struct OverlapReport {
    double mean_overlap = 0.0; // converges to d^2 / D
    double mean_jaccard = 0.0; // converges to alpha / (2 - alpha)
};

// Monte-Carlo expectation of |S1 ∩ S2| and Jaccard(S1, S2) over independent
// pairs of uniformly drawn d-subsets of [0, D).
OverlapReport overlap_expectation_mc(std::uint32_t D, std::uint32_t d,
                                     std::uint64_t n_draws, std::uint64_t seed);

// Samples M equicorrelated normal centroid estimates around a fixed point
// and measures the squared error of their average. Trials are chunked with
// per-chunk seeds, so results do not depend on the worker count.
ErrorReport centroid_model_mc(const TheoryParams& p);

struct BoundCheckReport {
    double kmeans_error = 0.0;
    double rpq_error = 0.0;
    bool bound_holds = false; // rpq_error <= kmeans_error * (1 + slack)
};

// Trains a single full-dimension K-means and an RPQ model with the same
// k_star, then compares their quantization errors in the reconstructed
// coordinate space. slack is relative.
BoundCheckReport end_to_end_bound_check(const FeatureMatrix& data, std::uint32_t M,
                                        double alpha, std::uint32_t k_star,
                                        std::uint64_t seed, double slack = 0.02,
                                        const KmeansConfig* base_cfg = nullptr);

// One random alpha*D dimension subset, one K-means on the sub-vectors;
// returns the mean per-frame quantization error in the sub-vector space.
double single_kmeans_control(const FeatureMatrix& data, double alpha,
                             std::uint32_t k_star, std::uint64_t seed,
                             const KmeansConfig* base_cfg = nullptr);

} // namespace dsr
