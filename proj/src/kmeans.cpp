#include "dsr/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace dsr {

void Codebook::validate() const {
    if (n_centroids < 1) {
        throw ValidationError("Codebook: n_centroids must be >= 1");
    }
    if (centroids.size() != static_cast<std::size_t>(n_centroids) * dim) {
        throw ValidationError("Codebook: centroid buffer size mismatch");
    }
    for (float v : centroids) {
        if (!std::isfinite(v)) {
            throw ValidationError("Codebook: non-finite centroid");
        }
    }
}

namespace {

// Widened copy so the inner distance loop runs entirely in doubles.
std::vector<double> widen(const std::vector<float>& v) {
    return {v.begin(), v.end()};
}

// Nearest centroid of one widened row; ties break to the lowest index.
std::pair<std::uint32_t, double> nearest(const double* x, const std::vector<double>& cents,
                                         std::uint32_t k, std::uint32_t d) {
    std::uint32_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::uint32_t u = 0; u < k; ++u) {
        const double* c = cents.data() + static_cast<std::size_t>(u) * d;
        double dist = 0.0;
        for (std::uint32_t j = 0; j < d; ++j) {
            const double diff = x[j] - c[j];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = u;
        }
    }
    return {best, best_dist};
}

// Fills labels/dists for all frames. The per-frame argmin is independent of
// evaluation order, so threading cannot change the result.
void assign_all(const FeatureMatrix& m, const std::vector<double>& cents, std::uint32_t k,
                std::uint32_t d, int threads, std::uint32_t* labels, double* dists) {
    const std::uint64_t L = m.n_frames;
    auto work = [&](std::uint64_t lo, std::uint64_t hi) {
        std::vector<double> x(d);
        for (std::uint64_t t = lo; t < hi; ++t) {
            const float* row = m.data.data() + t * d;
            for (std::uint32_t j = 0; j < d; ++j) {
                x[j] = row[j];
            }
            const auto [u, dist] = nearest(x.data(), cents, k, d);
            labels[t] = u;
            dists[t] = dist;
        }
    };
    if (threads <= 1 || L < 2048) {
        work(0, L);
        return;
    }
    const std::uint64_t n_workers = std::min<std::uint64_t>(threads, L);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::uint64_t w = 0; w < n_workers; ++w) {
        const std::uint64_t lo = L * w / n_workers;
        const std::uint64_t hi = L * (w + 1) / n_workers;
        pool.emplace_back(work, lo, hi);
    }
    for (auto& t : pool) {
        t.join();
    }
}

std::vector<std::uint32_t> init_random(const FeatureMatrix& data, std::uint32_t k,
                                       std::mt19937_64& rng) {
    std::vector<std::uint32_t> idx(data.n_frames);
    for (std::uint64_t i = 0; i < data.n_frames; ++i) {
        idx[i] = static_cast<std::uint32_t>(i);
    }
    // Partial Fisher-Yates: the first k entries are a uniform sample of
    // distinct rows.
    for (std::uint32_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::uint64_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

std::vector<std::uint32_t> init_kmeanspp(const FeatureMatrix& data, std::uint32_t k,
                                         std::mt19937_64& rng) {
    const std::uint64_t L = data.n_frames;
    const std::uint32_t d = data.dim;
    std::vector<std::uint32_t> chosen;
    chosen.reserve(k);
    std::vector<bool> used(L, false);

    std::uniform_int_distribution<std::uint64_t> first(0, L - 1);
    chosen.push_back(static_cast<std::uint32_t>(first(rng)));
    used[chosen[0]] = true;

    std::vector<double> mindist(L);
    std::vector<double> x(d), c(d);
    auto update_mindist = [&](std::uint32_t center, bool init) {
        const float* crow = data.data.data() + static_cast<std::uint64_t>(center) * d;
        for (std::uint32_t j = 0; j < d; ++j) {
            c[j] = crow[j];
        }
        for (std::uint64_t t = 0; t < L; ++t) {
            const float* row = data.data.data() + t * d;
            double dist = 0.0;
            for (std::uint32_t j = 0; j < d; ++j) {
                const double diff = static_cast<double>(row[j]) - c[j];
                dist += diff * diff;
            }
            if (init || dist < mindist[t]) {
                mindist[t] = dist;
            }
        }
    };
    update_mindist(chosen[0], true);

    for (std::uint32_t i = 1; i < k; ++i) {
        double total = 0.0;
        for (std::uint64_t t = 0; t < L; ++t) {
            total += mindist[t];
        }
        std::uint64_t pick = L; // sentinel
        if (total > 0.0) {
            std::uniform_real_distribution<double> r(0.0, total);
            const double target = r(rng);
            double cum = 0.0;
            std::uint64_t last_positive = L;
            for (std::uint64_t t = 0; t < L; ++t) {
                if (mindist[t] > 0.0) {
                    last_positive = t;
                    cum += mindist[t];
                    if (cum > target) {
                        pick = t;
                        break;
                    }
                }
            }
            if (pick == L) {
                pick = last_positive;
            }
        }
        if (pick == L) {
            // All remaining mass is zero (duplicate rows); take the first
            // unused row for determinism.
            for (std::uint64_t t = 0; t < L; ++t) {
                if (!used[t]) {
                    pick = t;
                    break;
                }
            }
        }
        used[pick] = true;
        chosen.push_back(static_cast<std::uint32_t>(pick));
        update_mindist(chosen.back(), false);
    }
    return chosen;
}

} // namespace

std::pair<Codebook, KmeansFitReport> train_kmeans(const FeatureMatrix& data,
                                                  const KmeansConfig& cfg) {
    data.validate();
    if (cfg.max_iters < 1) {
        throw ParamError("KmeansConfig: max_iters must be >= 1");
    }
    if (cfg.rel_tol < 0.0) {
        throw ParamError("KmeansConfig: rel_tol must be >= 0");
    }
    const std::uint32_t k = cfg.n_centroids;
    if (k < 1) {
        throw ParamError("KmeansConfig: n_centroids must be >= 1");
    }
    if (data.n_frames < k) {
        throw ValidationError("train_kmeans: fewer frames than centroids");
    }
    const std::uint64_t L = data.n_frames;
    const std::uint32_t d = data.dim;

    std::mt19937_64 rng(cfg.seed);
    const std::vector<std::uint32_t> seeds = cfg.init == KmeansInit::random
                                                 ? init_random(data, k, rng)
                                                 : init_kmeanspp(data, k, rng);
    Codebook cb;
    cb.n_centroids = k;
    cb.dim = d;
    cb.centroids.resize(static_cast<std::size_t>(k) * d);
    for (std::uint32_t u = 0; u < k; ++u) {
        const float* row = data.data.data() + static_cast<std::uint64_t>(seeds[u]) * d;
        std::copy(row, row + d, cb.centroids.data() + static_cast<std::size_t>(u) * d);
    }

    KmeansFitReport report;
    std::vector<std::uint32_t> labels(L);
    std::vector<double> dists(L);
    std::vector<double> cents = widen(cb.centroids);

    assign_all(data, cents, k, d, cfg.threads, labels.data(), dists.data());
    double inertia_now = 0.0;
    for (std::uint64_t t = 0; t < L; ++t) {
        inertia_now += dists[t];
    }
    report.inertia_history.push_back(inertia_now);

    std::vector<double> sums(static_cast<std::size_t>(k) * d);
    std::vector<std::uint64_t> counts(k);
    for (std::uint32_t it = 1; it <= cfg.max_iters; ++it) {
        // Centroid update: accumulate strictly in frame order.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint64_t t = 0; t < L; ++t) {
            const float* row = data.data.data() + t * d;
            double* s = sums.data() + static_cast<std::size_t>(labels[t]) * d;
            for (std::uint32_t j = 0; j < d; ++j) {
                s[j] += row[j];
            }
            ++counts[labels[t]];
        }
        for (std::uint32_t u = 0; u < k; ++u) {
            if (counts[u] == 0) {
                continue;
            }
            const double* s = sums.data() + static_cast<std::size_t>(u) * d;
            float* c = cb.centroids.data() + static_cast<std::size_t>(u) * d;
            for (std::uint32_t j = 0; j < d; ++j) {
                c[j] = static_cast<float>(s[j] / static_cast<double>(counts[u]));
            }
        }
        // Empty-cluster repair: reseed to the point currently farthest from
        // its assigned centroid (ties to the lowest frame index).
        for (std::uint32_t u = 0; u < k; ++u) {
            if (counts[u] != 0) {
                continue;
            }
            std::uint64_t far_t = 0;
            double far_d = -1.0;
            for (std::uint64_t t = 0; t < L; ++t) {
                if (dists[t] > far_d) {
                    far_d = dists[t];
                    far_t = t;
                }
            }
            const float* row = data.data.data() + far_t * d;
            std::copy(row, row + d, cb.centroids.data() + static_cast<std::size_t>(u) * d);
            dists[far_t] = -1.0; // unavailable to the next empty cluster
        }

        cents = widen(cb.centroids);
        assign_all(data, cents, k, d, cfg.threads, labels.data(), dists.data());
        inertia_now = 0.0;
        for (std::uint64_t t = 0; t < L; ++t) {
            inertia_now += dists[t];
        }
        report.inertia_history.push_back(inertia_now);
        report.iterations_run = it;

        const double prev = report.inertia_history[report.inertia_history.size() - 2];
        if (prev <= 0.0 || prev - inertia_now <= cfg.rel_tol * prev) {
            break;
        }
    }
    report.final_inertia = report.inertia_history.back();
    return {std::move(cb), std::move(report)};
}

std::uint32_t assign(std::span<const float> x, const Codebook& cb) {
    if (x.size() != cb.dim) {
        throw ShapeError("assign: vector length != codebook dim");
    }
    std::vector<double> xd(x.begin(), x.end());
    const std::vector<double> cents = widen(cb.centroids);
    return nearest(xd.data(), cents, cb.n_centroids, cb.dim).first;
}

std::vector<std::uint32_t> assign_batch(const FeatureMatrix& m, const Codebook& cb,
                                        int threads) {
    if (m.dim != cb.dim) {
        throw ShapeError("assign_batch: matrix dim != codebook dim");
    }
    std::vector<std::uint32_t> labels(m.n_frames);
    std::vector<double> dists(m.n_frames);
    const std::vector<double> cents = widen(cb.centroids);
    assign_all(m, cents, cb.n_centroids, cb.dim, threads, labels.data(), dists.data());
    return labels;
}

double inertia(const FeatureMatrix& m, const Codebook& cb, int threads) {
    if (m.dim != cb.dim) {
        throw ShapeError("inertia: matrix dim != codebook dim");
    }
    std::vector<std::uint32_t> labels(m.n_frames);
    std::vector<double> dists(m.n_frames);
    const std::vector<double> cents = widen(cb.centroids);
    assign_all(m, cents, cb.n_centroids, cb.dim, threads, labels.data(), dists.data());
    double total = 0.0;
    for (double v : dists) {
        total += v;
    }
    return total;
}

} // namespace dsr
