#include "dsr/feature_io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dsr {

void FeatureMatrix::validate() const {
    if (dim < 1) {
        throw ValidationError("FeatureMatrix: dim must be >= 1");
    }
    if (data.size() != static_cast<std::size_t>(n_frames) * dim) {
        throw ValidationError("FeatureMatrix: data length != n_frames * dim");
    }
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw ValidationError("FeatureMatrix: non-finite element");
        }
    }
}

namespace {

constexpr char kFeatureMagic[4] = {'D', 'S', 'R', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    // Host is little-endian; a byte copy is the wire format.
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        throw CorruptionError("truncated file");
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

// Writes through a temp file and renames, so failures leave no partial
// output behind.
class AtomicWriter {
public:
    explicit AtomicWriter(const std::string& path)
        : final_path_(path), tmp_path_(path + ".tmp"), os_(tmp_path_, std::ios::binary | std::ios::trunc) {
        if (!os_) {
            throw IoError("cannot open for writing: " + tmp_path_);
        }
    }
    ~AtomicWriter() {
        if (!committed_) {
            os_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_path_, ec);
        }
    }
    std::ostream& stream() { return os_; }
    void commit() {
        os_.flush();
        if (!os_) {
            throw IoError("write failed: " + tmp_path_);
        }
        os_.close();
        std::error_code ec;
        std::filesystem::rename(tmp_path_, final_path_, ec);
        if (ec) {
            throw IoError("cannot rename " + tmp_path_ + " -> " + final_path_);
        }
        committed_ = true;
    }

private:
    std::string final_path_;
    std::string tmp_path_;
    std::ofstream os_;
    bool committed_ = false;
};

} // namespace

FeatureMatrix read_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open: " + path);
    }
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw FormatError("bad magic in " + path);
    }
    const auto version = read_le<std::uint32_t>(is);
    if (version != kFeatureVersion) {
        throw FormatError("unsupported DSRF version " + std::to_string(version));
    }
    FeatureMatrix m;
    m.n_frames = read_le<std::uint64_t>(is);
    m.dim = read_le<std::uint32_t>(is);
    (void)read_le<std::uint32_t>(is); // reserved
    if (m.dim < 1) {
        throw FormatError("DSRF dim must be >= 1");
    }
    const std::size_t count = static_cast<std::size_t>(m.n_frames) * m.dim;
    m.data.resize(count);
    if (count > 0) {
        is.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (is.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
            throw CorruptionError("truncated payload in " + path);
        }
    }
    // Trailing bytes mean the header lied about the size.
    is.peek();
    if (!is.eof()) {
        throw CorruptionError("trailing bytes in " + path);
    }
    m.validate();
    return m;
}

void write_features(const FeatureMatrix& m, const std::string& path) {
    m.validate();
    AtomicWriter w(path);
    auto& os = w.stream();
    os.write(kFeatureMagic, 4);
    write_le(os, kFeatureVersion);
    write_le(os, m.n_frames);
    write_le(os, m.dim);
    write_le(os, std::uint32_t{0});
    if (!m.data.empty()) {
        os.write(reinterpret_cast<const char*>(m.data.data()),
                 static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    }
    w.commit();
}

std::vector<TokenStream> read_token_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open: " + path);
    }
    std::vector<TokenStream> corpus;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') {
            continue;
        }
        TokenStream s;
        s.utterance_id = std::to_string(corpus.size());
        std::uint32_t n_streams = 0;
        std::istringstream frames(line);
        std::string frame;
        while (frames >> frame) {
            std::uint32_t width = 0;
            std::size_t pos = 0;
            while (pos <= frame.size()) {
                std::size_t comma = frame.find(',', pos);
                if (comma == std::string::npos) {
                    comma = frame.size();
                }
                const std::string tok = frame.substr(pos, comma - pos);
                std::size_t consumed = 0;
                unsigned long v = 0;
                try {
                    v = std::stoul(tok, &consumed);
                } catch (const std::exception&) {
                    throw FormatError(path + ":" + std::to_string(lineno) + ": bad token '" + tok + "'");
                }
                if (consumed != tok.size()) {
                    throw FormatError(path + ":" + std::to_string(lineno) + ": bad token '" + tok + "'");
                }
                s.tokens.push_back(static_cast<std::uint32_t>(v));
                ++width;
                pos = comma + 1;
                if (comma == frame.size()) {
                    break;
                }
            }
            if (n_streams == 0) {
                n_streams = width;
            } else if (width != n_streams) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": ragged frame width");
            }
        }
        s.n_streams = n_streams == 0 ? 1 : n_streams;
        corpus.push_back(std::move(s));
    }
    return corpus;
}

void write_token_file(const std::vector<TokenStream>& corpus, const std::string& path) {
    AtomicWriter w(path);
    auto& os = w.stream();
    for (const auto& s : corpus) {
        const std::uint64_t L = s.n_frames();
        for (std::uint64_t t = 0; t < L; ++t) {
            if (t > 0) {
                os << ' ';
            }
            for (std::uint32_t m = 0; m < s.n_streams; ++m) {
                if (m > 0) {
                    os << ',';
                }
                os << s.tokens[t * s.n_streams + m];
            }
        }
        os << '\n';
    }
    w.commit();
}

} // namespace dsr
