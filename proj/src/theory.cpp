#include "dsr/theory.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "dsr/quantizer.hpp"

namespace dsr {

double predicted_error_factor(std::uint32_t M, double rho) {
    if (M < 1) {
        throw ParamError("predicted_error_factor: M must be >= 1");
    }
    if (rho < 0.0 || rho > 1.0) {
        throw ParamError("predicted_error_factor: rho must be in [0, 1]");
    }
    const double inv_m = 1.0 / static_cast<double>(M);
    return inv_m + (1.0 - inv_m) * rho;
}

double predicted_rho(double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) {
        throw ParamError("predicted_rho: alpha must be in (0, 1]");
    }
    return alpha / (2.0 - alpha);
}

OverlapReport overlap_expectation_mc(std::uint32_t D, std::uint32_t d,
                                     std::uint64_t n_draws, std::uint64_t seed) {
    if (d < 1 || d > D) {
        throw ParamError("overlap_expectation_mc: need 1 <= d <= D");
    }
    if (n_draws < 1) {
        throw ParamError("overlap_expectation_mc: n_draws must be >= 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> idx(D);
    std::vector<std::uint64_t> stamp(D, 0);
    auto draw_subset = [&](std::vector<std::uint32_t>& out) {
        for (std::uint32_t i = 0; i < D; ++i) {
            idx[i] = i;
        }
        for (std::uint32_t i = 0; i < d; ++i) {
            std::uniform_int_distribution<std::uint32_t> pick(i, D - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        out.assign(idx.begin(), idx.begin() + d);
    };

    std::vector<std::uint32_t> s1, s2;
    std::uint64_t overlap_sum = 0;
    double jaccard_sum = 0.0;
    for (std::uint64_t n = 1; n <= n_draws; ++n) {
        draw_subset(s1);
        draw_subset(s2);
        for (std::uint32_t v : s1) {
            stamp[v] = n;
        }
        std::uint32_t inter = 0;
        for (std::uint32_t v : s2) {
            if (stamp[v] == n) {
                ++inter;
            }
        }
        overlap_sum += inter;
        jaccard_sum += static_cast<double>(inter) / static_cast<double>(2 * d - inter);
    }
    OverlapReport r;
    r.mean_overlap = static_cast<double>(overlap_sum) / static_cast<double>(n_draws);
    r.mean_jaccard = jaccard_sum / static_cast<double>(n_draws);
    return r;
}

namespace {

constexpr std::uint64_t kChunkTrials = 1 << 16;

struct ChunkSums {
    double err = 0.0;
    double zhat = 0.0;
    double zhat2 = 0.0;
};

// One fixed-size slice of the trial range; seeded from (seed, chunk index)
// only, so the partition into workers cannot change the outcome.
ChunkSums run_chunk(const TheoryParams& p, std::uint64_t chunk, std::uint64_t trials) {
    std::mt19937_64 rng(p.seed ^ (0x9e3779b97f4a7c15ull * (chunk + 1)));
    std::normal_distribution<double> normal(0.0, std::sqrt(p.sigma2));
    const double w_common = std::sqrt(p.rho);
    const double w_own = std::sqrt(1.0 - p.rho);
    const std::uint32_t M = p.n_subspaces;

    ChunkSums s;
    for (std::uint64_t i = 0; i < trials; ++i) {
        const double g = normal(rng);
        double mean_e = 0.0;
        for (std::uint32_t m = 0; m < M; ++m) {
            mean_e += normal(rng);
        }
        mean_e /= M;
        // z = 0 without loss of generality: the error is shift-invariant.
        const double zhat = w_common * g + w_own * mean_e;
        s.err += zhat * zhat;
        s.zhat += zhat;
        s.zhat2 += zhat * zhat;
    }
    return s;
}

} // namespace

ErrorReport centroid_model_mc(const TheoryParams& p) {
    if (p.n_trials < 1) {
        throw ParamError("centroid_model_mc: n_trials must be >= 1");
    }
    if (p.rho < 0.0 || p.rho > 1.0) {
        throw ParamError("centroid_model_mc: rho must be in [0, 1]");
    }
    if (!(p.sigma2 > 0.0)) {
        throw ParamError("centroid_model_mc: sigma2 must be > 0");
    }
    if (p.n_subspaces < 1) {
        throw ParamError("centroid_model_mc: M must be >= 1");
    }

    const std::uint64_t n_chunks = (p.n_trials + kChunkTrials - 1) / kChunkTrials;
    auto chunk_trials = [&](std::uint64_t c) {
        return c + 1 < n_chunks ? kChunkTrials : p.n_trials - c * kChunkTrials;
    };

    std::vector<ChunkSums> partial(n_chunks);
    if (p.threads <= 1 || n_chunks == 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) {
            partial[c] = run_chunk(p, c, chunk_trials(c));
        }
    } else {
        std::atomic<std::uint64_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::uint64_t c = next.fetch_add(1);
                if (c >= n_chunks) {
                    return;
                }
                partial[c] = run_chunk(p, c, chunk_trials(c));
            }
        };
        std::vector<std::thread> pool;
        const std::uint64_t n_workers =
            std::min<std::uint64_t>(static_cast<std::uint64_t>(p.threads), n_chunks);
        for (std::uint64_t w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    ChunkSums total;
    for (const auto& s : partial) { // reduce in chunk order
        total.err += s.err;
        total.zhat += s.zhat;
        total.zhat2 += s.zhat2;
    }
    const double n = static_cast<double>(p.n_trials);
    ErrorReport r;
    r.empirical_error = total.err / n;
    const double mean_zhat = total.zhat / n;
    r.bias2 = mean_zhat * mean_zhat;
    r.variance = total.zhat2 / n - mean_zhat * mean_zhat;
    r.predicted_error = predicted_error_factor(p.n_subspaces, p.rho) * p.sigma2;
    r.rel_gap = std::abs(r.empirical_error - r.predicted_error) / r.predicted_error;
    return r;
}

BoundCheckReport end_to_end_bound_check(const FeatureMatrix& data, std::uint32_t M,
                                        double alpha, std::uint32_t k_star,
                                        std::uint64_t seed, double slack,
                                        const KmeansConfig* base_cfg) {
    KmeansConfig cfg = base_cfg ? *base_cfg : KmeansConfig{};
    cfg.seed = seed;

    // Default inits follow the usual practice (kmeans++ baseline, random RPQ);
    // an explicit base_cfg pins one init for both sides.
    KmeansConfig kms_cfg = cfg;
    if (!base_cfg) {
        kms_cfg.init = KmeansInit::kmeanspp;
    }
    const auto kms_model =
        train_quantizer(data, make_layout_contiguous(data.dim, 1), k_star, kms_cfg,
                        QuantizerMethod::kmeans);

    KmeansConfig rpq_cfg = cfg;
    if (!base_cfg) {
        rpq_cfg.init = KmeansInit::random;
    }
    const auto rpq_model =
        train_quantizer(data, make_layout_random(data.dim, M, alpha, seed), k_star, rpq_cfg,
                        QuantizerMethod::rpq);

    BoundCheckReport r;
    r.kmeans_error = quantization_error(data, kms_model);
    r.rpq_error = quantization_error(data, rpq_model);
    r.bound_holds = r.rpq_error <= r.kmeans_error * (1.0 + slack);
    return r;
}

double single_kmeans_control(const FeatureMatrix& data, double alpha,
                             std::uint32_t k_star, std::uint64_t seed,
                             const KmeansConfig* base_cfg) {
    const auto layout = make_layout_random(data.dim, 1, alpha, seed);
    FeatureMatrix sub;
    sub.n_frames = data.n_frames;
    sub.dim = layout.sub_dim;
    sub.data.resize(static_cast<std::size_t>(sub.n_frames) * sub.dim);
    const auto& set = layout.index_sets[0];
    for (std::uint64_t t = 0; t < data.n_frames; ++t) {
        const float* row = data.data.data() + t * data.dim;
        float* out = sub.data.data() + t * sub.dim;
        for (std::uint32_t j = 0; j < sub.dim; ++j) {
            out[j] = row[set[j]];
        }
    }
    KmeansConfig cfg = base_cfg ? *base_cfg : KmeansConfig{};
    cfg.n_centroids = k_star;
    cfg.seed = seed;
    const auto [cb, report] = train_kmeans(sub, cfg);
    (void)report;
    return inertia(sub, cb, cfg.threads) / static_cast<double>(sub.n_frames);
}

} // namespace dsr
