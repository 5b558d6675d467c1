#pragma once

#include <cstdint>

#include "sargam/corpus.hpp"

namespace sargam {

// Seeded synthetic corpus for training and pipeline exercises. Each
// record's fixed_code is buggy_only with the first token substituted by
// the partner of its right neighbor (partner(v_k) = v_{k+1 mod |vocab|})
// and the partner of the last token appended.
struct SyntheticOptions {
    int vocab_tokens = 20;
    int min_len = 4;
    int max_len = 8;
};

Dataset make_synthetic_dataset(size_t n, std::uint64_t seed,
                               const SyntheticOptions& options = {});

} // namespace sargam
