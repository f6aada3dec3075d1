#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsr/kmeans.hpp"
#include "dsr/tokens.hpp"

namespace dsr {

enum class LayoutKind : std::uint8_t { contiguous = 0, random = 1 };
enum class QuantizerMethod : std::uint8_t { kmeans = 0, pq = 1, rpq = 2 };

// How the D input dimensions map onto M sub-vectors of size sub_dim.
// Contiguous layouts partition [0, D); random layouts sample each index set
// without replacement, independently across sets (overlap allowed).
struct SubspaceLayout {
    LayoutKind kind = LayoutKind::contiguous;
    std::uint32_t total_dim = 0;   // D
    std::uint32_t n_subspaces = 0; // M
    std::uint32_t sub_dim = 0;     // d
    std::vector<std::vector<std::uint32_t>> index_sets;
    float alpha = 0.0f;     // random kind only
    std::uint64_t seed = 0; // random kind only

    void validate() const;
};

SubspaceLayout make_layout_contiguous(std::uint32_t D, std::uint32_t M);

// d = max(1, floor(alpha * D)); pure function of (D, M, alpha, seed).
SubspaceLayout make_layout_random(std::uint32_t D, std::uint32_t M, double alpha,
                                  std::uint64_t seed);

// Gather x at layout.index_sets[m], preserving the stored index order.
std::vector<float> project(std::span<const float> x, const SubspaceLayout& layout,
                           std::uint32_t m);

struct TrainMeta {
    std::uint64_t seed = 0;
    KmeansInit init = KmeansInit::kmeanspp;
    std::uint64_t data_fingerprint = 0; // FNV-1a over the training payload
};

struct QuantizerModel {
    QuantizerMethod method = QuantizerMethod::kmeans;
    SubspaceLayout layout;
    std::vector<Codebook> codebooks; // one per subspace, k_star x sub_dim each
    std::uint32_t k_star = 0;
    TrainMeta train_meta;
    std::vector<float> dim_means; // per-dimension training means, length D

    void validate() const;

    // (k_star)^M as a decimal string; the stored centroid count is only
    // M * k_star.
    std::string effective_codebook_size() const;
};

// Trains one sub-quantizer per subspace on the projected data. Subspace m
// uses seed kcfg.seed ^ m so sub-quantizers differ. kcfg.n_centroids is
// ignored in favor of k_star.
QuantizerModel train_quantizer(const FeatureMatrix& data, const SubspaceLayout& layout,
                               std::uint32_t k_star, const KmeansConfig& kcfg,
                               QuantizerMethod method = QuantizerMethod::pq);

// Per-subspace nearest-centroid tokens for one frame.
std::vector<std::uint32_t> encode(std::span<const float> x, const QuantizerModel& model);

TokenStream encode_batch(const FeatureMatrix& m, const QuantizerModel& model);

// Dimension i reconstructs to the mean of its centroid components over all
// covering subspaces, or to dim_means[i] when no subspace samples it.
std::vector<float> reconstruct(std::span<const std::uint32_t> code,
                               const QuantizerModel& model);

// Mean over frames of || x_t - reconstruct(encode(x_t)) ||^2.
double quantization_error(const FeatureMatrix& data, const QuantizerModel& model);

// DSRQ container: magic "DSRQ" | version u32=1 | kind u8 | D u32 | M u32 |
// d u32 | k_star u32 | alpha f32 | seed u64 | M*d u32 index table |
// D f32 dim_means | M*k_star*d f32 centroids, little-endian.
void save_model(const QuantizerModel& model, const std::string& path);
QuantizerModel load_model(const std::string& path);

} // namespace dsr
