#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsr/errors.hpp"

namespace dsr {

// Per-frame M-tuples of centroid indices, flattened row-major.
struct TokenStream {
    std::uint32_t n_streams = 1;
    std::vector<std::uint32_t> tokens; // n_frames * n_streams
    std::string utterance_id;

    std::uint64_t n_frames() const {
        return n_streams == 0 ? 0 : tokens.size() / n_streams;
    }
};

struct MergeRule {
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t merged = 0;
};

struct MergeTable {
    std::vector<MergeRule> merges; // merged ids are consecutive from base_vocab
    std::uint32_t base_vocab = 0;
    std::uint32_t target_vocab = 0;
};

// Collapses consecutive identical tokens. Single-stream only: multi-stream
// codes must stay frame-aligned, so n_streams > 1 raises AlignmentError.
TokenStream dedup(const TokenStream& s);

// Greedy pair merging: at each step the globally most frequent adjacent pair
// is replaced by a fresh token id. Ties break lexicographically on
// (left, right). base_vocab defaults to max token + 1 over the corpus.
MergeTable train_merges(const std::vector<TokenStream>& corpus, std::uint32_t target_vocab,
                        std::uint32_t base_vocab = 0);

// Rules applied in training order; within a rule, left-to-right
// non-overlapping replacement.
TokenStream apply_merges(const TokenStream& s, const MergeTable& t);

struct StreamStats {
    double avg_length = 0.0;
    std::uint64_t vocab_used = 0;
};

StreamStats stream_stats(const std::vector<TokenStream>& corpus);

// Merge table text file: header "DSRM 1 <base_vocab> <target_vocab>", then
// one "<left> <right> <new>" rule per line.
void save_merge_table(const MergeTable& t, const std::string& path);
MergeTable load_merge_table(const std::string& path);

} // namespace dsr
