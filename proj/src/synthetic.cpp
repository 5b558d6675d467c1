#include "sargam/synthetic.hpp"

#include <random>

#include "sargam/tokenize.hpp"

namespace sargam {

Dataset make_synthetic_dataset(size_t n, std::uint64_t seed,
                               const SyntheticOptions& options) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, options.vocab_tokens - 1);
    std::uniform_int_distribution<int> pick_len(options.min_len,
                                                options.max_len);
    auto tok = [](int k) { return "v" + std::to_string(k); };
    auto partner = [&](int k) {
        return tok((k + 1) % options.vocab_tokens);
    };

    Dataset ds;
    for (size_t i = 0; i < n; ++i) {
        int len = pick_len(rng);
        std::vector<int> ids(static_cast<size_t>(len));
        for (auto& id : ids)
            id = pick(rng);

        TokenSequence buggy;
        for (int id : ids)
            buggy.push_back(tok(id));
        TokenSequence fixed = buggy;
        fixed[0] = partner(ids[1]);
        fixed.push_back(partner(ids.back()));

        PatchRecord r;
        r.id = "syn" + std::to_string(i);
        r.buggy_only = join_tokens(buggy);
        r.prev_code = "void m ( ) {\n" + r.buggy_only + "\n}";
        r.commit_msg = "apply partner rewrite";
        r.fixed_code = join_tokens(fixed);
        ds.records.push_back(std::move(r));
    }
    return ds;
}

} // namespace sargam
