#include "dsr/synthetic.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace dsr {

namespace {

// In-place Cholesky of a symmetric positive-definite matrix, row-major.
// Returns the lower-triangular factor.
std::vector<double> cholesky(std::vector<double> a, std::uint32_t n) {
    for (std::uint32_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::uint32_t k = 0; k < j; ++k) {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if (diag <= 0.0) {
            throw ValidationError("cholesky: matrix not positive definite");
        }
        a[j * n + j] = std::sqrt(diag);
        for (std::uint32_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::uint32_t k = 0; k < j; ++k) {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / a[j * n + j];
        }
    }
    // Zero the strict upper triangle.
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = i + 1; j < n; ++j) {
            a[i * n + j] = 0.0;
        }
    }
    return a;
}

} // namespace

FeatureMatrix generate_synthetic(const SynthSpec& spec) {
    if (spec.correlation < 0.0 || spec.correlation > 1.0) {
        throw ParamError("SynthSpec: correlation must be in [0, 1]");
    }
    if (spec.n_modes < 1) {
        throw ParamError("SynthSpec: n_modes must be >= 1");
    }
    if (spec.dim < 1) {
        throw ParamError("SynthSpec: dim must be >= 1");
    }

    const std::uint32_t D = spec.dim;
    const std::uint32_t K = spec.n_modes;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Component means, then the exact mixture moments they imply (uniform
    // weights, unit within-component noise).
    std::vector<double> means(static_cast<std::size_t>(K) * D);
    for (auto& v : means) {
        v = spec.mode_spread * normal(rng);
    }
    std::vector<double> mu(D, 0.0);
    for (std::uint32_t k = 0; k < K; ++k) {
        for (std::uint32_t j = 0; j < D; ++j) {
            mu[j] += means[k * D + j];
        }
    }
    for (auto& v : mu) {
        v /= K;
    }
    std::vector<double> sigma(static_cast<std::size_t>(D) * D, 0.0);
    for (std::uint32_t i = 0; i < D; ++i) {
        for (std::uint32_t j = i; j < D; ++j) {
            double c = 0.0;
            for (std::uint32_t k = 0; k < K; ++k) {
                c += (means[k * D + i] - mu[i]) * (means[k * D + j] - mu[j]);
            }
            c /= K;
            if (i == j) {
                c += 1.0;
            }
            sigma[i * D + j] = c;
            sigma[j * D + i] = c;
        }
    }

    // Target factor T: per-dimension variances kept, correlation matrix
    // block-diagonal over the designated pairs (2i, 2i+1).
    const double corr = spec.correlation;
    std::vector<double> target(static_cast<std::size_t>(D) * D, 0.0);
    for (std::uint32_t a = 0; a + 1 < D; a += 2) {
        const std::uint32_t b = a + 1;
        const double sa = std::sqrt(sigma[a * D + a]);
        const double sb = std::sqrt(sigma[b * D + b]);
        target[a * D + a] = sa;
        target[b * D + a] = corr * sb;
        target[b * D + b] = std::sqrt(1.0 - corr * corr) * sb;
    }
    if (D % 2 == 1) {
        target[(D - 1) * static_cast<std::size_t>(D) + (D - 1)] =
            std::sqrt(sigma[(D - 1) * static_cast<std::size_t>(D) + (D - 1)]);
    }

    // A = T * L^{-1} re-colors the raw mixture so that its population
    // covariance becomes exactly T * T^T.
    const std::vector<double> chol = cholesky(sigma, D);
    std::vector<double> recolor(static_cast<std::size_t>(D) * D, 0.0);
    for (std::uint32_t r = 0; r < D; ++r) {
        for (std::int64_t j = D - 1; j >= 0; --j) {
            double s = target[r * D + j];
            for (std::uint32_t k = j + 1; k < D; ++k) {
                s -= recolor[r * D + k] * chol[k * D + j];
            }
            recolor[r * D + j] = s / chol[j * D + j];
        }
    }

    FeatureMatrix out;
    out.n_frames = spec.n_frames;
    out.dim = D;
    out.data.resize(static_cast<std::size_t>(spec.n_frames) * D);

    std::uniform_int_distribution<std::uint32_t> pick_mode(0, K - 1);
    std::vector<double> raw(D);
    for (std::uint64_t t = 0; t < spec.n_frames; ++t) {
        const std::uint32_t mode = pick_mode(rng);
        for (std::uint32_t j = 0; j < D; ++j) {
            raw[j] = means[mode * D + j] + normal(rng) - mu[j];
        }
        float* row = out.data.data() + t * D;
        for (std::uint32_t i = 0; i < D; ++i) {
            double y = mu[i];
            const double* ai = recolor.data() + static_cast<std::size_t>(i) * D;
            for (std::uint32_t j = 0; j < D; ++j) {
                y += ai[j] * raw[j];
            }
            row[i] = static_cast<float>(y);
        }
    }
    return out;
}

} // namespace dsr
