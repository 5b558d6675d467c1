#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace sargam {

// One training/eval example in the B2F-like JSONL schema.
struct PatchRecord {
    std::string id;
    std::string buggy_only; // edit-location line(s); may be empty
    std::string prev_code;  // whole method, v0
    std::string commit_msg; // developer intent, optional (empty = absent)
    std::string fixed_code; // target patch, v1

    bool operator==(const PatchRecord&) const = default;
};

enum class SplitTag { train, eval, test };

struct Dataset {
    std::vector<PatchRecord> records;
    SplitTag split_tag = SplitTag::train;

    bool operator==(const Dataset&) const = default;
};

// One PatchRecord per nonblank line, order preserved. Throws ParseError
// (with line number), SchemaError (naming the field) or Error on
// duplicate ids.
Dataset load_jsonl(const std::string& path);

void save_jsonl(const Dataset& dataset, const std::string& path);

// Deterministic shuffle-then-partition. Sizes are floor(fraction*N),
// remainders assigned train, eval, test in that order.
std::tuple<Dataset, Dataset, Dataset>
split(const Dataset& dataset, double train_frac, double eval_frac,
      double test_frac, std::uint64_t seed);

// Validates the per-record and per-dataset invariants; throws on
// violation.
void validate(const Dataset& dataset);

} // namespace sargam
