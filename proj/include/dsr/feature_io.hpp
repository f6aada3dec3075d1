#pragma once

#include <string>
#include <vector>

#include "dsr/feature_matrix.hpp"
#include "dsr/tokens.hpp"

namespace dsr {

// DSRF container: magic "DSRF" | version u32=1 | n_frames u64 | dim u32 |
// reserved u32=0 | n_frames*dim f32 payload, row-major, little-endian.
FeatureMatrix read_features(const std::string& path);
void write_features(const FeatureMatrix& m, const std::string& path);

// Token stream text file: one utterance per line, frames separated by
// spaces, each frame is M comma-joined base-10 indices (M=1: plain
// integer). Lines starting with '#' are comments.
std::vector<TokenStream> read_token_file(const std::string& path);
void write_token_file(const std::vector<TokenStream>& corpus, const std::string& path);

} // namespace dsr
