#include "dsr/tokens.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dsr {

namespace {

std::uint64_t pair_key(std::uint32_t left, std::uint32_t right) {
    return (static_cast<std::uint64_t>(left) << 32) | right;
}

// Left-to-right non-overlapping replacement of one pair.
void apply_rule(std::vector<std::uint32_t>& seq, const MergeRule& rule) {
    std::size_t out = 0;
    std::size_t i = 0;
    while (i < seq.size()) {
        if (i + 1 < seq.size() && seq[i] == rule.left && seq[i + 1] == rule.right) {
            seq[out++] = rule.merged;
            i += 2;
        } else {
            seq[out++] = seq[i++];
        }
    }
    seq.resize(out);
}

} // namespace

TokenStream dedup(const TokenStream& s) {
    if (s.n_streams != 1) {
        throw AlignmentError("dedup: multi-stream codes must stay frame-aligned");
    }
    TokenStream out;
    out.n_streams = 1;
    out.utterance_id = s.utterance_id;
    out.tokens.reserve(s.tokens.size());
    for (std::uint32_t tok : s.tokens) {
        if (out.tokens.empty() || out.tokens.back() != tok) {
            out.tokens.push_back(tok);
        }
    }
    return out;
}

MergeTable train_merges(const std::vector<TokenStream>& corpus, std::uint32_t target_vocab,
                        std::uint32_t base_vocab) {
    if (corpus.empty()) {
        throw ValidationError("train_merges: empty corpus");
    }
    std::vector<std::vector<std::uint32_t>> work;
    work.reserve(corpus.size());
    std::uint32_t max_tok = 0;
    bool any_tok = false;
    for (const auto& s : corpus) {
        if (s.n_streams != 1) {
            throw AlignmentError("train_merges: multi-stream corpus");
        }
        for (std::uint32_t tok : s.tokens) {
            max_tok = std::max(max_tok, tok);
            any_tok = true;
        }
        work.push_back(s.tokens);
    }
    if (base_vocab == 0) {
        base_vocab = any_tok ? max_tok + 1 : 1;
    } else if (any_tok && max_tok >= base_vocab) {
        throw ValidationError("train_merges: corpus token >= base_vocab");
    }
    if (target_vocab <= base_vocab) {
        throw ParamError("train_merges: target_vocab must exceed base vocabulary");
    }

    MergeTable table;
    table.base_vocab = base_vocab;
    const std::uint32_t n_merges = target_vocab - base_vocab;
    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    for (std::uint32_t step = 0; step < n_merges; ++step) {
        counts.clear();
        for (const auto& seq : work) {
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                ++counts[pair_key(seq[i], seq[i + 1])];
            }
        }
        if (counts.empty()) {
            break; // nothing left to merge
        }
        std::uint64_t best_key = 0;
        std::uint64_t best_count = 0;
        for (const auto& [key, count] : counts) {
            if (count > best_count || (count == best_count && key < best_key)) {
                best_key = key;
                best_count = count;
            }
        }
        MergeRule rule;
        rule.left = static_cast<std::uint32_t>(best_key >> 32);
        rule.right = static_cast<std::uint32_t>(best_key & 0xffffffffu);
        rule.merged = base_vocab + step;
        for (auto& seq : work) {
            apply_rule(seq, rule);
        }
        table.merges.push_back(rule);
    }
    table.target_vocab = base_vocab + static_cast<std::uint32_t>(table.merges.size());
    return table;
}

TokenStream apply_merges(const TokenStream& s, const MergeTable& t) {
    if (s.n_streams != 1) {
        throw AlignmentError("apply_merges: multi-stream codes must stay frame-aligned");
    }
    for (std::uint32_t tok : s.tokens) {
        if (tok >= t.target_vocab) {
            throw ValidationError("apply_merges: token outside known vocabulary");
        }
    }
    TokenStream out;
    out.n_streams = 1;
    out.utterance_id = s.utterance_id;
    out.tokens = s.tokens;
    for (const auto& rule : t.merges) {
        apply_rule(out.tokens, rule);
    }
    return out;
}

StreamStats stream_stats(const std::vector<TokenStream>& corpus) {
    StreamStats stats;
    if (corpus.empty()) {
        return stats;
    }
    std::unordered_set<std::uint32_t> vocab;
    std::uint64_t total = 0;
    for (const auto& s : corpus) {
        total += s.n_frames();
        vocab.insert(s.tokens.begin(), s.tokens.end());
    }
    stats.avg_length = static_cast<double>(total) / static_cast<double>(corpus.size());
    stats.vocab_used = vocab.size();
    return stats;
}

void save_merge_table(const MergeTable& t, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) {
            throw IoError("cannot open for writing: " + tmp);
        }
        os << "DSRM 1 " << t.base_vocab << ' ' << t.target_vocab << '\n';
        for (const auto& rule : t.merges) {
            os << rule.left << ' ' << rule.right << ' ' << rule.merged << '\n';
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

MergeTable load_merge_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open: " + path);
    }
    std::string magic;
    std::uint32_t version = 0;
    MergeTable t;
    if (!(is >> magic >> version >> t.base_vocab >> t.target_vocab) || magic != "DSRM") {
        throw FormatError("bad merge table header in " + path);
    }
    if (version != 1) {
        throw FormatError("unsupported DSRM version " + std::to_string(version));
    }
    MergeRule rule;
    while (is >> rule.left >> rule.right >> rule.merged) {
        const std::uint32_t expected = t.base_vocab + static_cast<std::uint32_t>(t.merges.size());
        if (rule.merged != expected) {
            throw FormatError("merge table ids must be consecutive from base_vocab");
        }
        t.merges.push_back(rule);
    }
    if (!is.eof()) {
        throw FormatError("bad merge rule in " + path);
    }
    if (t.base_vocab + t.merges.size() != t.target_vocab) {
        throw FormatError("merge table rule count != target_vocab - base_vocab");
    }
    return t;
}

} // namespace dsr
