#pragma once

#include <string>
#include <vector>

#include "sargam/tokenize.hpp"

namespace sargam {

// Position-anchored edit operation. Positions refer to the ORIGINAL
// sequence: Delete(src_pos) removes original token src_pos; Insert with
// src_gap g places a token before original token g (g may equal len).
struct EditOp {
    enum class Kind { Delete, Insert };
    Kind kind;
    size_t pos; // src_pos for Delete, src_gap for Insert
    std::string token; // Insert only

    bool operator==(const EditOp&) const = default;
};

struct EditScript {
    std::vector<EditOp> ops;

    bool empty() const { return ops.empty(); }
    bool operator==(const EditScript&) const = default;
};

// Expert supervision for one (y_hat, y_star) pair, in LevT decode order:
// delete, then placeholders per gap of the kept subsequence, then the
// tokens filling them left to right.
struct ExpertLabels {
    std::vector<int> del_mask;       // per y_hat token, 1 = delete
    std::vector<int> plh_counts;     // per gap of the kept sequence (len+1)
    TokenSequence ins_tokens;        // sum(plh_counts) entries
};

// Classic Levenshtein distance (insert/delete/substitute, unit cost).
size_t levenshtein(const TokenSequence& a, const TokenSequence& b);

// levenshtein / max(len); 0 when both empty.
double normalized_distance(const TokenSequence& a, const TokenSequence& b);

// Min normalized distance over the first min(k, |candidates|) candidates.
double min_topk_distance(const std::vector<TokenSequence>& candidates,
                         const TokenSequence& target, size_t k);

// Minimal delete/insert-only script turning a into b, deterministic
// (leftmost-LCS tie-breaking, deletes before inserts at a site).
EditScript align(const TokenSequence& a, const TokenSequence& b);

// Deletions first (by original index), then insertions at original gaps.
TokenSequence apply(const EditScript& script, const TokenSequence& a);

// Oracle labels: delete everything outside the leftmost LCS with y_star,
// then count/list the y_star tokens missing from each gap.
ExpertLabels expert_labels(const TokenSequence& y_hat,
                           const TokenSequence& y_star);

// Applies del_mask, then inserts ins_tokens per plh_counts. Used by
// tests and the oracle refinement policy.
TokenSequence apply_expert(const ExpertLabels& labels,
                           const TokenSequence& y_hat);

} // namespace sargam
