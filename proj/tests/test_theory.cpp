#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dsr/synthetic.hpp"
#include "dsr/theory.hpp"

using namespace dsr;

TEST_CASE("predicted error factor") {
    CHECK(predicted_error_factor(1, 0.0) == 1.0);
    CHECK(predicted_error_factor(1, 0.7) == 1.0);
    CHECK(predicted_error_factor(4, 0.0) == 0.25);
    CHECK(predicted_error_factor(1000000, 0.2) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK_THROWS_AS(predicted_error_factor(4, 1.5), ParamError);
}

TEST_CASE("predicted error factor stays in [rho, 1], decreasing in M, increasing in rho") {
    for (double rho : {0.0, 0.1, 0.3, 0.7, 1.0}) {
        double prev = 1.0 + 1e-12;
        for (std::uint32_t M : {1u, 2u, 3u, 5u, 9u, 33u, 1000u}) {
            const double f = predicted_error_factor(M, rho);
            CHECK(f >= rho);
            CHECK(f <= 1.0);
            CHECK(f <= prev);
            prev = f;
        }
    }
    for (std::uint32_t M : {2u, 8u, 32u}) {
        double prev = -1.0;
        for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double f = predicted_error_factor(M, rho);
            CHECK(f > prev);
            prev = f;
        }
    }
}

TEST_CASE("predicted rho") {
    CHECK(predicted_rho(1.0) == 1.0);
    CHECK(predicted_rho(0.25) == doctest::Approx(1.0 / 7.0));
    CHECK(predicted_rho(0.125) == doctest::Approx(0.0667).epsilon(1e-2));
    CHECK_THROWS_AS(predicted_rho(0.0), ParamError);

    double prev = 0.0;
    for (double alpha : {0.01, 0.1, 0.3, 0.6, 0.9, 1.0}) {
        const double r = predicted_rho(alpha);
        CHECK(r > prev);
        prev = r;
    }
    CHECK(predicted_rho(1e-9) < 1e-8);
}

TEST_CASE("subset overlap expectation") {
    const auto r = overlap_expectation_mc(16, 4, 100000, 3);
    CHECK(std::abs(r.mean_overlap - 1.0) < 0.05); // d^2 / D = 1

    // d = D: overlap is exactly D and Jaccard exactly 1 on every draw.
    const auto full = overlap_expectation_mc(10, 10, 1000, 4);
    CHECK(full.mean_overlap == 10.0);
    CHECK(full.mean_jaccard == 1.0);

    // alpha = 12.5% of 1024 dims: Jaccard expectation near alpha/(2-alpha).
    const auto j = overlap_expectation_mc(1024, 128, 100000, 5);
    CHECK(std::abs(j.mean_jaccard - 0.0667) < 0.003);

    CHECK_THROWS_AS(overlap_expectation_mc(8, 9, 10, 1), ParamError);
}

TEST_CASE("centroid model matches the closed-form error") {
    TheoryParams p;
    p.sigma2 = 1.0;
    p.n_trials = 1000000;
    p.seed = 11;

    SUBCASE("single quantizer recovers sigma^2") {
        p.n_subspaces = 1;
        p.rho = 0.0;
        const auto r = centroid_model_mc(p);
        CHECK(r.rel_gap < 0.02);
        CHECK(r.predicted_error == 1.0);
    }
    SUBCASE("fully correlated centroids never average out") {
        p.n_subspaces = 6;
        p.rho = 1.0;
        const auto r = centroid_model_mc(p);
        CHECK(r.predicted_error == 1.0);
        CHECK(r.rel_gap < 0.02);
    }
    SUBCASE("M=8 rho=0.25") {
        p.n_subspaces = 8;
        p.rho = 0.25;
        const auto r = centroid_model_mc(p);
        CHECK(r.predicted_error == doctest::Approx(0.34375));
        CHECK(r.rel_gap < 0.02);
    }
}

TEST_CASE("centroid model bias vanishes with the trial count") {
    TheoryParams p;
    p.n_subspaces = 4;
    p.rho = 0.3;
    p.sigma2 = 2.0;
    p.n_trials = 1000000;
    p.seed = 9;
    const auto r = centroid_model_mc(p);
    const double sem2 = r.variance / static_cast<double>(p.n_trials);
    CHECK(r.bias2 < 3.0 * sem2);
}

TEST_CASE("centroid model is invariant to the worker count") {
    TheoryParams p;
    p.n_subspaces = 8;
    p.rho = 0.5;
    p.n_trials = 200000;
    p.seed = 21;
    const auto serial = centroid_model_mc(p);
    p.threads = 3;
    const auto parallel = centroid_model_mc(p);
    CHECK(serial.empirical_error == parallel.empirical_error);
    CHECK(serial.bias2 == parallel.bias2);
    CHECK(serial.variance == parallel.variance);
}

TEST_CASE("doubling trials shrinks the median relative gap") {
    TheoryParams p;
    p.n_subspaces = 4;
    p.rho = 0.2;
    std::vector<double> small_gaps, large_gaps;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
        p.seed = seed;
        p.n_trials = 20000;
        small_gaps.push_back(centroid_model_mc(p).rel_gap);
        p.n_trials = 1280000;
        large_gaps.push_back(centroid_model_mc(p).rel_gap);
    }
    std::sort(small_gaps.begin(), small_gaps.end());
    std::sort(large_gaps.begin(), large_gaps.end());
    CHECK(large_gaps[4] < small_gaps[4]);
}

TEST_CASE("centroid model rejects bad parameters") {
    TheoryParams p;
    p.rho = -0.1;
    CHECK_THROWS_AS(centroid_model_mc(p), ParamError);
    p.rho = 1.1;
    CHECK_THROWS_AS(centroid_model_mc(p), ParamError);
    p.rho = 0.5;
    p.sigma2 = 0.0;
    CHECK_THROWS_AS(centroid_model_mc(p), ParamError);
}

TEST_CASE("end-to-end degeneracy: M=1, alpha=1 matches the baseline exactly") {
    SynthSpec spec;
    spec.dim = 6;
    spec.n_frames = 2000;
    spec.n_modes = 4;
    spec.seed = 2;
    const auto data = generate_synthetic(spec);
    KmeansConfig cfg;
    cfg.init = KmeansInit::random;
    const auto r = end_to_end_bound_check(data, 1, 1.0, 16, 5, 0.02, &cfg);
    CHECK(r.rpq_error == r.kmeans_error);
    CHECK(r.bound_holds);
}

TEST_CASE("RPQ error stays below the single K-means error") {
    SynthSpec spec;
    spec.dim = 16;
    spec.n_frames = 6000;
    spec.n_modes = 4;
    spec.seed = 8;
    const auto data = generate_synthetic(spec);
    const auto r = end_to_end_bound_check(data, 8, 0.25, 32, 3);
    CHECK(r.bound_holds);
    CHECK(r.rpq_error >= 0.0);
    CHECK(r.kmeans_error >= 0.0);
}

TEST_CASE("single K-means control") {
    SynthSpec spec;
    spec.dim = 16;
    spec.n_frames = 4000;
    spec.n_modes = 4;
    spec.seed = 19;
    const auto data = generate_synthetic(spec);

    // alpha = 1 is the plain baseline.
    KmeansConfig cfg;
    cfg.n_centroids = 16;
    cfg.seed = 6;
    const auto [cb, report] = train_kmeans(data, cfg);
    const double baseline = inertia(data, cb) / static_cast<double>(data.n_frames);
    CHECK(single_kmeans_control(data, 1.0, 16, 6) == baseline);

    // As a full-vector representation, a narrow subset is worse per dimension:
    // every unsampled dimension pays its whole variance.
    double total_var = 0.0;
    for (std::uint32_t j = 0; j < data.dim; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::uint64_t t = 0; t < data.n_frames; ++t) {
            const double v = data.data[t * data.dim + j];
            s += v;
            s2 += v * v;
        }
        const double mean = s / static_cast<double>(data.n_frames);
        total_var += s2 / static_cast<double>(data.n_frames) - mean * mean;
    }
    const double avg_var = total_var / data.dim;
    auto full_error_per_dim = [&](double alpha) {
        const auto d = static_cast<std::uint32_t>(alpha * data.dim);
        return (single_kmeans_control(data, alpha, 16, 6) +
                static_cast<double>(data.dim - d) * avg_var) /
               static_cast<double>(data.dim);
    };
    CHECK(full_error_per_dim(0.0625) >= full_error_per_dim(0.5) * 0.95);
    CHECK(full_error_per_dim(0.5) >= full_error_per_dim(1.0) * 0.95);

    // Reproducible subset and error.
    CHECK(single_kmeans_control(data, 0.5, 16, 6) == single_kmeans_control(data, 0.5, 16, 6));
}
