#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "dsr/feature_io.hpp"
#include "dsr/synthetic.hpp"

using namespace dsr;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Sample Pearson correlation between two columns.
double column_correlation(const FeatureMatrix& m, std::uint32_t a, std::uint32_t b) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    const double n = static_cast<double>(m.n_frames);
    for (std::uint64_t t = 0; t < m.n_frames; ++t) {
        const double x = m.data[t * m.dim + a];
        const double y = m.data[t * m.dim + b];
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double va = saa / n - (sa / n) * (sa / n);
    const double vb = sbb / n - (sb / n) * (sb / n);
    return cov / std::sqrt(va * vb);
}

} // namespace

TEST_CASE("feature round-trip is bit-exact") {
    FeatureMatrix m;
    m.n_frames = 2;
    m.dim = 3;
    m.data = {1.5f, -2.25f, 0.0f, 3.0f, 1e-30f, -7.125f};
    const auto path = tmp_path("dsrf_roundtrip.dsrf");
    write_features(m, path);
    const auto back = read_features(path);
    CHECK(back.n_frames == m.n_frames);
    CHECK(back.dim == m.dim);
    CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);

    // 24-byte header + 6 * 4 payload bytes.
    CHECK(std::filesystem::file_size(path) == 24 + 24);
}

TEST_CASE("single-element file size is fixed by the format") {
    FeatureMatrix m;
    m.n_frames = 1;
    m.dim = 1;
    m.data = {0.0f};
    const auto path = tmp_path("dsrf_single.dsrf");
    write_features(m, path);
    CHECK(std::filesystem::file_size(path) == 24 + 4);
}

TEST_CASE("empty payload with dim 8") {
    FeatureMatrix m;
    m.n_frames = 0;
    m.dim = 8;
    const auto path = tmp_path("dsrf_empty.dsrf");
    write_features(m, path);
    const auto back = read_features(path);
    CHECK(back.n_frames == 0);
    CHECK(back.dim == 8);
    CHECK(back.data.empty());
}

TEST_CASE("reader rejects malformed files") {
    const auto path = tmp_path("dsrf_bad.dsrf");

    SUBCASE("bad magic") {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << "NOPE";
        os.close();
        CHECK_THROWS_AS(read_features(path), FormatError);
    }
    SUBCASE("truncated payload: 5 of 6 declared values") {
        FeatureMatrix m;
        m.n_frames = 2;
        m.dim = 3;
        m.data.assign(6, 1.0f);
        write_features(m, path);
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
        CHECK_THROWS_AS(read_features(path), CorruptionError);
    }
    SUBCASE("NaN payload") {
        FeatureMatrix m;
        m.n_frames = 1;
        m.dim = 2;
        m.data = {1.0f, 2.0f};
        write_features(m, path);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::fstream os(path, std::ios::binary | std::ios::in | std::ios::out);
        os.seekp(24);
        os.write(reinterpret_cast<const char*>(&nan), 4);
        os.close();
        CHECK_THROWS_AS(read_features(path), ValidationError);
    }
    SUBCASE("bad version") {
        FeatureMatrix m;
        m.n_frames = 1;
        m.dim = 1;
        m.data = {1.0f};
        write_features(m, path);
        std::fstream os(path, std::ios::binary | std::ios::in | std::ios::out);
        const std::uint32_t v = 9;
        os.seekp(4);
        os.write(reinterpret_cast<const char*>(&v), 4);
        os.close();
        CHECK_THROWS_AS(read_features(path), FormatError);
    }
}

TEST_CASE("writer rejects invalid matrices and unwritable paths") {
    FeatureMatrix m;
    m.n_frames = 1;
    m.dim = 2;
    m.data = {1.0f, std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(write_features(m, tmp_path("dsrf_inf.dsrf")), ValidationError);

    m.data = {1.0f, 2.0f};
    CHECK_THROWS_AS(write_features(m, "/nonexistent-dir/x.dsrf"), IoError);
}

TEST_CASE("round-trip property on random matrices") {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> normal;
    for (int rep = 0; rep < 20; ++rep) {
        FeatureMatrix m;
        m.n_frames = rng() % 40;
        m.dim = 1 + rng() % 12;
        m.data.resize(m.n_frames * m.dim);
        for (auto& v : m.data) {
            v = normal(rng);
        }
        const auto path = tmp_path("dsrf_prop.dsrf");
        write_features(m, path);
        const auto back = read_features(path);
        REQUIRE(back.data.size() == m.data.size());
        CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("synthetic generation is deterministic") {
    SynthSpec spec;
    spec.dim = 6;
    spec.n_frames = 500;
    spec.n_modes = 3;
    spec.correlation = 0.4;
    spec.seed = 7;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);

    spec.seed = 8;
    const auto c = generate_synthetic(spec);
    CHECK(std::memcmp(a.data.data(), c.data.data(), a.data.size() * sizeof(float)) != 0);
}

TEST_CASE("synthetic correlation targets are met") {
    SynthSpec spec;
    spec.dim = 8;
    spec.n_frames = 100000;
    spec.n_modes = 4;
    spec.seed = 3;

    SUBCASE("zero correlation everywhere") {
        spec.correlation = 0.0;
        const auto m = generate_synthetic(spec);
        double worst = 0.0;
        for (std::uint32_t a = 0; a < spec.dim; ++a) {
            for (std::uint32_t b = a + 1; b < spec.dim; ++b) {
                worst = std::max(worst, std::abs(column_correlation(m, a, b)));
            }
        }
        CHECK(worst < 0.05);
    }
    SUBCASE("designated pairs hit 0.9") {
        spec.correlation = 0.9;
        const auto m = generate_synthetic(spec);
        for (std::uint32_t a = 0; a + 1 < spec.dim; a += 2) {
            const double c = column_correlation(m, a, a + 1);
            CHECK(c > 0.85);
            CHECK(c < 0.95);
        }
    }
}

TEST_CASE("synthetic rejects bad specs") {
    SynthSpec spec;
    spec.correlation = 1.5;
    CHECK_THROWS_AS(generate_synthetic(spec), ParamError);
    spec.correlation = 0.5;
    spec.n_modes = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), ParamError);
}

TEST_CASE("token file round-trip") {
    std::vector<TokenStream> corpus(2);
    corpus[0].n_streams = 1;
    corpus[0].tokens = {3, 3, 5, 2};
    corpus[1].n_streams = 1;
    corpus[1].tokens = {};
    const auto path = tmp_path("tokens_single.txt");
    write_token_file(corpus, path);
    const auto back = read_token_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].tokens == corpus[0].tokens);
    CHECK(back[1].tokens.empty());

    std::vector<TokenStream> multi(1);
    multi[0].n_streams = 3;
    multi[0].tokens = {1, 2, 3, 4, 5, 6};
    const auto mpath = tmp_path("tokens_multi.txt");
    write_token_file(multi, mpath);
    const auto mback = read_token_file(mpath);
    REQUIRE(mback.size() == 1);
    CHECK(mback[0].n_streams == 3);
    CHECK(mback[0].tokens == multi[0].tokens);
}

TEST_CASE("token file comments and errors") {
    const auto path = tmp_path("tokens_bad.txt");
    {
        std::ofstream os(path, std::ios::trunc);
        os << "# comment line\n1,2 3,4\n";
    }
    auto corpus = read_token_file(path);
    REQUIRE(corpus.size() == 1);
    CHECK(corpus[0].n_streams == 2);

    {
        std::ofstream os(path, std::ios::trunc);
        os << "1,2 3\n";
    }
    CHECK_THROWS_AS(read_token_file(path), FormatError);

    {
        std::ofstream os(path, std::ios::trunc);
        os << "1 x\n";
    }
    CHECK_THROWS_AS(read_token_file(path), FormatError);
}
