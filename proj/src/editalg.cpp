#include "sargam/editalg.hpp"

#include <algorithm>

#include "sargam/errors.hpp"

namespace sargam {

namespace {

// Leftmost LCS as (pos in a, pos in b) pairs. Suffix DP, then a forward
// walk that takes every optimal match as early as possible and prefers
// advancing in a on ties.
std::vector<std::pair<size_t, size_t>> lcs_matches(const TokenSequence& a,
                                                   const TokenSequence& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> L(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;)
        for (size_t j = m; j-- > 0;) {
            if (a[i] == b[j])
                L[i][j] = L[i + 1][j + 1] + 1;
            else
                L[i][j] = std::max(L[i + 1][j], L[i][j + 1]);
        }
    std::vector<std::pair<size_t, size_t>> matches;
    size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j] && L[i][j] == L[i + 1][j + 1] + 1) {
            matches.emplace_back(i, j);
            ++i;
            ++j;
        } else if (L[i + 1][j] >= L[i][j + 1]) {
            ++i;
        } else {
            ++j;
        }
    }
    return matches;
}

} // namespace

size_t levenshtein(const TokenSequence& a, const TokenSequence& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j)
        prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double normalized_distance(const TokenSequence& a, const TokenSequence& b) {
    size_t longer = std::max(a.size(), b.size());
    if (longer == 0)
        return 0.0;
    return static_cast<double>(levenshtein(a, b)) /
           static_cast<double>(longer);
}

double min_topk_distance(const std::vector<TokenSequence>& candidates,
                         const TokenSequence& target, size_t k) {
    if (candidates.empty())
        throw ArgumentError("min_topk_distance: no candidates");
    if (k == 0)
        throw ArgumentError("min_topk_distance: k must be positive");
    size_t limit = std::min(k, candidates.size());
    double best = 1.0;
    for (size_t i = 0; i < limit; ++i)
        best = std::min(best, normalized_distance(candidates[i], target));
    return best;
}

EditScript align(const TokenSequence& a, const TokenSequence& b) {
    auto matches = lcs_matches(a, b);
    EditScript script;
    size_t mi = 0; // next match
    size_t j = 0;  // next b position
    for (size_t i = 0; i <= a.size(); ++i) {
        bool matched_here =
            mi < matches.size() && matches[mi].first == i;
        // Delete unmatched original token at i (deletes sort before the
        // inserts anchored at the following gap).
        if (i < a.size() && !matched_here)
            script.ops.push_back(
                {EditOp::Kind::Delete, i, std::string{}});
        if (matched_here) {
            // b tokens before this match that were skipped get inserted
            // at gap i.
            while (j < matches[mi].second) {
                script.ops.push_back({EditOp::Kind::Insert, i, b[j]});
                ++j;
            }
            ++j; // the matched b token itself
            ++mi;
        } else if (i == a.size()) {
            while (j < b.size()) {
                script.ops.push_back({EditOp::Kind::Insert, i, b[j]});
                ++j;
            }
        }
    }
    // Inserts that precede an unmatched (deleted) run must still anchor
    // at the gap of the next KEPT token; the loop above anchors them at
    // the match position, which is the same gap after deletions. Sort to
    // canonical order: position ascending, Delete before Insert.
    std::stable_sort(script.ops.begin(), script.ops.end(),
                     [](const EditOp& x, const EditOp& y) {
                         if (x.pos != y.pos)
                             return x.pos < y.pos;
                         return x.kind == EditOp::Kind::Delete &&
                                y.kind == EditOp::Kind::Insert;
                     });
    return script;
}

TokenSequence apply(const EditScript& script, const TokenSequence& a) {
    std::vector<char> keep(a.size(), 1);
    std::vector<std::vector<const std::string*>> inserts(a.size() + 1);
    for (const auto& op : script.ops) {
        if (op.kind == EditOp::Kind::Delete) {
            if (op.pos >= a.size())
                throw ScriptError("delete position out of range: " +
                                  std::to_string(op.pos));
            keep[op.pos] = 0;
        } else {
            if (op.pos > a.size())
                throw ScriptError("insert gap out of range: " +
                                  std::to_string(op.pos));
            inserts[op.pos].push_back(&op.token);
        }
    }
    TokenSequence out;
    for (size_t i = 0; i <= a.size(); ++i) {
        for (const std::string* t : inserts[i])
            out.push_back(*t);
        if (i < a.size() && keep[i])
            out.push_back(a[i]);
    }
    return out;
}

ExpertLabels expert_labels(const TokenSequence& y_hat,
                           const TokenSequence& y_star) {
    auto matches = lcs_matches(y_hat, y_star);
    ExpertLabels labels;
    labels.del_mask.assign(y_hat.size(), 1);
    for (const auto& [i, j] : matches)
        labels.del_mask[i] = 0;

    const size_t kept_len = matches.size();
    labels.plh_counts.assign(kept_len + 1, 0);
    size_t j = 0; // y_star cursor
    for (size_t k = 0; k < matches.size(); ++k) {
        while (j < matches[k].second) {
            ++labels.plh_counts[k];
            labels.ins_tokens.push_back(y_star[j]);
            ++j;
        }
        ++j;
    }
    while (j < y_star.size()) {
        ++labels.plh_counts[kept_len];
        labels.ins_tokens.push_back(y_star[j]);
        ++j;
    }
    return labels;
}

TokenSequence apply_expert(const ExpertLabels& labels,
                           const TokenSequence& y_hat) {
    if (labels.del_mask.size() != y_hat.size())
        throw ScriptError("expert del_mask length mismatch");
    TokenSequence kept;
    for (size_t i = 0; i < y_hat.size(); ++i)
        if (!labels.del_mask[i])
            kept.push_back(y_hat[i]);
    if (labels.plh_counts.size() != kept.size() + 1)
        throw ScriptError("expert plh_counts length mismatch");
    TokenSequence out;
    size_t next_ins = 0;
    for (size_t g = 0; g <= kept.size(); ++g) {
        for (int c = 0; c < labels.plh_counts[g]; ++c)
            out.push_back(labels.ins_tokens.at(next_ins++));
        if (g < kept.size())
            out.push_back(kept[g]);
    }
    return out;
}

} // namespace sargam
