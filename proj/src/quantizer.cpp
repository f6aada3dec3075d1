#include "dsr/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace dsr {

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        throw CorruptionError("truncated model file");
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

constexpr char kModelMagic[4] = {'D', 'S', 'R', 'Q'};
constexpr std::uint32_t kModelVersion = 1;

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

void SubspaceLayout::validate() const {
    if (n_subspaces < 1 || sub_dim < 1 || total_dim < 1) {
        throw ValidationError("SubspaceLayout: counts must be >= 1");
    }
    if (index_sets.size() != n_subspaces) {
        throw ValidationError("SubspaceLayout: wrong number of index sets");
    }
    for (const auto& set : index_sets) {
        if (set.size() != sub_dim) {
            throw ValidationError("SubspaceLayout: index set size != sub_dim");
        }
        std::vector<bool> seen(total_dim, false);
        for (std::uint32_t idx : set) {
            if (idx >= total_dim) {
                throw ValidationError("SubspaceLayout: index out of range");
            }
            if (seen[idx]) {
                throw ValidationError("SubspaceLayout: duplicate index within a set");
            }
            seen[idx] = true;
        }
    }
    if (kind == LayoutKind::contiguous) {
        if (static_cast<std::uint64_t>(sub_dim) * n_subspaces != total_dim) {
            throw ValidationError("SubspaceLayout: contiguous layout must tile [0, D)");
        }
        for (std::uint32_t m = 0; m < n_subspaces; ++m) {
            for (std::uint32_t j = 0; j < sub_dim; ++j) {
                if (index_sets[m][j] != m * sub_dim + j) {
                    throw ValidationError("SubspaceLayout: contiguous index sets malformed");
                }
            }
        }
    }
}

SubspaceLayout make_layout_contiguous(std::uint32_t D, std::uint32_t M) {
    if (M < 1) {
        throw ParamError("make_layout_contiguous: M must be >= 1");
    }
    if (D == 0 || D % M != 0) {
        throw ParamError("make_layout_contiguous: D must be divisible by M");
    }
    SubspaceLayout layout;
    layout.kind = LayoutKind::contiguous;
    layout.total_dim = D;
    layout.n_subspaces = M;
    layout.sub_dim = D / M;
    layout.index_sets.resize(M);
    for (std::uint32_t m = 0; m < M; ++m) {
        layout.index_sets[m].resize(layout.sub_dim);
        for (std::uint32_t j = 0; j < layout.sub_dim; ++j) {
            layout.index_sets[m][j] = m * layout.sub_dim + j;
        }
    }
    return layout;
}

SubspaceLayout make_layout_random(std::uint32_t D, std::uint32_t M, double alpha,
                                  std::uint64_t seed) {
    if (M < 1 || D < 1) {
        throw ParamError("make_layout_random: D and M must be >= 1");
    }
    if (!(alpha > 0.0) || alpha > 1.0) {
        throw ParamError("make_layout_random: alpha must be in (0, 1]");
    }
    const std::uint32_t d = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(alpha * static_cast<double>(D)));
    SubspaceLayout layout;
    layout.kind = LayoutKind::random;
    layout.total_dim = D;
    layout.n_subspaces = M;
    layout.sub_dim = d;
    layout.alpha = static_cast<float>(alpha);
    layout.seed = seed;
    layout.index_sets.resize(M);

    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> idx(D);
    for (std::uint32_t m = 0; m < M; ++m) {
        for (std::uint32_t i = 0; i < D; ++i) {
            idx[i] = i;
        }
        if (d < D) {
            // Partial Fisher-Yates per set: sampling without replacement
            // inside a set, independent across sets.
            for (std::uint32_t i = 0; i < d; ++i) {
                std::uniform_int_distribution<std::uint32_t> pick(i, D - 1);
                std::swap(idx[i], idx[pick(rng)]);
            }
        }
        // alpha = 1 keeps the identity order, so it degenerates to the
        // full-space quantizer exactly.
        layout.index_sets[m].assign(idx.begin(), idx.begin() + d);
    }
    return layout;
}

std::vector<float> project(std::span<const float> x, const SubspaceLayout& layout,
                           std::uint32_t m) {
    if (x.size() != layout.total_dim) {
        throw ShapeError("project: vector length != layout total_dim");
    }
    if (m >= layout.n_subspaces) {
        throw ShapeError("project: subspace index out of range");
    }
    const auto& set = layout.index_sets[m];
    std::vector<float> out(set.size());
    for (std::size_t j = 0; j < set.size(); ++j) {
        out[j] = x[set[j]];
    }
    return out;
}

void QuantizerModel::validate() const {
    layout.validate();
    if (k_star < 1) {
        throw ValidationError("QuantizerModel: k_star must be >= 1");
    }
    if (codebooks.size() != layout.n_subspaces) {
        throw ValidationError("QuantizerModel: codebook count != n_subspaces");
    }
    for (const auto& cb : codebooks) {
        cb.validate();
        if (cb.dim != layout.sub_dim || cb.n_centroids != k_star) {
            throw ValidationError("QuantizerModel: codebook shape mismatch");
        }
    }
    if (dim_means.size() != layout.total_dim) {
        throw ValidationError("QuantizerModel: dim_means length != total_dim");
    }
    for (float v : dim_means) {
        if (!std::isfinite(v)) {
            throw ValidationError("QuantizerModel: non-finite dim mean");
        }
    }
}

std::string QuantizerModel::effective_codebook_size() const {
    // (k_star)^M in base-10; values overflow 64 bits well before M = 16, so
    // multiply a little-endian digit vector instead.
    std::vector<std::uint32_t> digits{1};
    for (std::uint32_t m = 0; m < layout.n_subspaces; ++m) {
        std::uint64_t carry = 0;
        for (auto& dgt : digits) {
            const std::uint64_t v = static_cast<std::uint64_t>(dgt) * k_star + carry;
            dgt = static_cast<std::uint32_t>(v % 10);
            carry = v / 10;
        }
        while (carry > 0) {
            digits.push_back(static_cast<std::uint32_t>(carry % 10));
            carry /= 10;
        }
    }
    std::string out(digits.size(), '0');
    for (std::size_t i = 0; i < digits.size(); ++i) {
        out[digits.size() - 1 - i] = static_cast<char>('0' + digits[i]);
    }
    return out;
}

QuantizerModel train_quantizer(const FeatureMatrix& data, const SubspaceLayout& layout,
                               std::uint32_t k_star, const KmeansConfig& kcfg,
                               QuantizerMethod method) {
    layout.validate();
    if (data.dim != layout.total_dim) {
        throw ShapeError("train_quantizer: data dim != layout total_dim");
    }
    if (data.n_frames < k_star) {
        throw ValidationError("train_quantizer: fewer frames than centroids");
    }

    QuantizerModel model;
    model.method = method;
    model.layout = layout;
    model.k_star = k_star;
    model.train_meta.seed = kcfg.seed;
    model.train_meta.init = kcfg.init;
    model.train_meta.data_fingerprint =
        fnv1a(data.data.data(), data.data.size() * sizeof(float));

    model.dim_means.resize(data.dim);
    for (std::uint32_t j = 0; j < data.dim; ++j) {
        double s = 0.0;
        for (std::uint64_t t = 0; t < data.n_frames; ++t) {
            s += data.data[t * data.dim + j];
        }
        model.dim_means[j] =
            data.n_frames == 0 ? 0.0f : static_cast<float>(s / static_cast<double>(data.n_frames));
    }

    model.codebooks.resize(layout.n_subspaces);
    for (std::uint32_t m = 0; m < layout.n_subspaces; ++m) {
        FeatureMatrix sub;
        sub.n_frames = data.n_frames;
        sub.dim = layout.sub_dim;
        sub.data.resize(static_cast<std::size_t>(sub.n_frames) * sub.dim);
        const auto& set = layout.index_sets[m];
        for (std::uint64_t t = 0; t < data.n_frames; ++t) {
            const float* row = data.data.data() + t * data.dim;
            float* out = sub.data.data() + t * sub.dim;
            for (std::uint32_t j = 0; j < sub.dim; ++j) {
                out[j] = row[set[j]];
            }
        }
        KmeansConfig cfg = kcfg;
        cfg.n_centroids = k_star;
        cfg.seed = kcfg.seed ^ m; // sub-quantizers must differ
        model.codebooks[m] = train_kmeans(sub, cfg).first;
    }
    return model;
}

std::vector<std::uint32_t> encode(std::span<const float> x, const QuantizerModel& model) {
    if (x.size() != model.layout.total_dim) {
        throw ShapeError("encode: vector length != model total_dim");
    }
    std::vector<std::uint32_t> code(model.layout.n_subspaces);
    for (std::uint32_t m = 0; m < model.layout.n_subspaces; ++m) {
        const std::vector<float> sub = project(x, model.layout, m);
        code[m] = assign(sub, model.codebooks[m]);
    }
    return code;
}

TokenStream encode_batch(const FeatureMatrix& m, const QuantizerModel& model) {
    if (m.dim != model.layout.total_dim) {
        throw ShapeError("encode_batch: matrix dim != model total_dim");
    }
    TokenStream out;
    out.n_streams = model.layout.n_subspaces;
    out.tokens.reserve(m.n_frames * out.n_streams);
    for (std::uint64_t t = 0; t < m.n_frames; ++t) {
        const auto code = encode(m.row(t), model);
        out.tokens.insert(out.tokens.end(), code.begin(), code.end());
    }
    return out;
}

std::vector<float> reconstruct(std::span<const std::uint32_t> code,
                               const QuantizerModel& model) {
    const auto& layout = model.layout;
    if (code.size() != layout.n_subspaces) {
        throw ShapeError("reconstruct: code length != n_subspaces");
    }
    std::vector<double> sum(layout.total_dim, 0.0);
    std::vector<std::uint32_t> cover(layout.total_dim, 0);
    for (std::uint32_t m = 0; m < layout.n_subspaces; ++m) {
        if (code[m] >= model.k_star) {
            throw ValidationError("reconstruct: token out of range");
        }
        const auto centroid = model.codebooks[m].centroid(code[m]);
        const auto& set = layout.index_sets[m];
        for (std::uint32_t j = 0; j < layout.sub_dim; ++j) {
            sum[set[j]] += centroid[j];
            ++cover[set[j]];
        }
    }
    std::vector<float> out(layout.total_dim);
    for (std::uint32_t i = 0; i < layout.total_dim; ++i) {
        out[i] = cover[i] > 0 ? static_cast<float>(sum[i] / cover[i]) : model.dim_means[i];
    }
    return out;
}

double quantization_error(const FeatureMatrix& data, const QuantizerModel& model) {
    if (data.dim != model.layout.total_dim) {
        throw ShapeError("quantization_error: matrix dim != model total_dim");
    }
    if (data.n_frames == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::uint64_t t = 0; t < data.n_frames; ++t) {
        const auto row = data.row(t);
        const auto rec = reconstruct(encode(row, model), model);
        double err = 0.0;
        for (std::uint32_t j = 0; j < data.dim; ++j) {
            const double diff = static_cast<double>(row[j]) - rec[j];
            err += diff * diff;
        }
        total += err;
    }
    return total / static_cast<double>(data.n_frames);
}

void save_model(const QuantizerModel& model, const std::string& path) {
    model.validate();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot open for writing: " + tmp);
        }
        os.write(kModelMagic, 4);
        write_le(os, kModelVersion);
        write_le(os, static_cast<std::uint8_t>(model.method));
        write_le(os, model.layout.total_dim);
        write_le(os, model.layout.n_subspaces);
        write_le(os, model.layout.sub_dim);
        write_le(os, model.k_star);
        write_le(os, model.layout.alpha);
        write_le(os, model.layout.seed);
        for (const auto& set : model.layout.index_sets) {
            for (std::uint32_t idx : set) {
                write_le(os, idx);
            }
        }
        os.write(reinterpret_cast<const char*>(model.dim_means.data()),
                 static_cast<std::streamsize>(model.dim_means.size() * sizeof(float)));
        for (const auto& cb : model.codebooks) {
            os.write(reinterpret_cast<const char*>(cb.centroids.data()),
                     static_cast<std::streamsize>(cb.centroids.size() * sizeof(float)));
        }
        os.flush();
        if (!os) {
            throw IoError("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp + " -> " + path);
    }
}

QuantizerModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open: " + path);
    }
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0) {
        throw FormatError("bad magic in " + path);
    }
    const auto version = read_le<std::uint32_t>(is);
    if (version != kModelVersion) {
        throw FormatError("unsupported DSRQ version " + std::to_string(version));
    }
    QuantizerModel model;
    const auto kind = read_le<std::uint8_t>(is);
    if (kind > 2) {
        throw FormatError("unknown quantizer kind");
    }
    model.method = static_cast<QuantizerMethod>(kind);
    model.layout.total_dim = read_le<std::uint32_t>(is);
    model.layout.n_subspaces = read_le<std::uint32_t>(is);
    model.layout.sub_dim = read_le<std::uint32_t>(is);
    model.k_star = read_le<std::uint32_t>(is);
    model.layout.alpha = read_le<float>(is);
    model.layout.seed = read_le<std::uint64_t>(is);
    model.layout.kind =
        model.method == QuantizerMethod::rpq ? LayoutKind::random : LayoutKind::contiguous;

    const std::uint32_t M = model.layout.n_subspaces;
    const std::uint32_t d = model.layout.sub_dim;
    const std::uint32_t D = model.layout.total_dim;
    if (M < 1 || d < 1 || D < 1 || model.k_star < 1) {
        throw FormatError("DSRQ header has zero counts");
    }
    model.layout.index_sets.assign(M, std::vector<std::uint32_t>(d));
    for (auto& set : model.layout.index_sets) {
        for (auto& idx : set) {
            idx = read_le<std::uint32_t>(is);
        }
    }
    model.dim_means.resize(D);
    is.read(reinterpret_cast<char*>(model.dim_means.data()),
            static_cast<std::streamsize>(D * sizeof(float)));
    if (is.gcount() != static_cast<std::streamsize>(D * sizeof(float))) {
        throw CorruptionError("truncated dim_means in " + path);
    }
    model.codebooks.resize(M);
    for (auto& cb : model.codebooks) {
        cb.n_centroids = model.k_star;
        cb.dim = d;
        cb.centroids.resize(static_cast<std::size_t>(model.k_star) * d);
        is.read(reinterpret_cast<char*>(cb.centroids.data()),
                static_cast<std::streamsize>(cb.centroids.size() * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(cb.centroids.size() * sizeof(float))) {
            throw CorruptionError("truncated centroids in " + path);
        }
    }
    is.peek();
    if (!is.eof()) {
        throw CorruptionError("trailing bytes in " + path);
    }
    model.validate();
    return model;
}

} // namespace dsr
