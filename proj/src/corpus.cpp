#include "sargam/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sargam/errors.hpp"

namespace sargam {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* field, size_t line_no) {
    if (!j.contains(field))
        throw SchemaError("line " + std::to_string(line_no) +
                          ": missing required field \"" + field + "\"");
    if (!j.at(field).is_string())
        throw SchemaError("line " + std::to_string(line_no) + ": field \"" +
                          field + "\" must be a string");
    return j.at(field).get<std::string>();
}

} // namespace

void validate(const Dataset& dataset) {
    std::unordered_set<std::string> seen;
    for (const auto& r : dataset.records) {
        if (r.id.empty())
            throw SchemaError("record with empty id");
        if (!seen.insert(r.id).second)
            throw SchemaError("duplicate record id: " + r.id);
        if (r.fixed_code.empty())
            throw SchemaError("record " + r.id + ": fixed_code is empty");
        if (r.prev_code.empty())
            throw SchemaError("record " + r.id + ": prev_code is empty");
    }
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open dataset: " + path);
    Dataset ds;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        PatchRecord r;
        r.id = require_string(j, "id", line_no);
        r.prev_code = require_string(j, "prev_code", line_no);
        r.fixed_code = require_string(j, "fixed_code", line_no);
        if (j.contains("buggy_only"))
            r.buggy_only = j.at("buggy_only").get<std::string>();
        if (j.contains("commit_msg") && !j.at("commit_msg").is_null())
            r.commit_msg = j.at("commit_msg").get<std::string>();
        ds.records.push_back(std::move(r));
    }
    validate(ds);
    return ds;
}

void save_jsonl(const Dataset& dataset, const std::string& path) {
    std::ofstream f(path, std::ios::binary); // LF line endings everywhere
    if (!f)
        throw IoError("cannot write dataset: " + path);
    for (const auto& r : dataset.records) {
        json j{{"id", r.id},
               {"buggy_only", r.buggy_only},
               {"prev_code", r.prev_code},
               {"commit_msg", r.commit_msg},
               {"fixed_code", r.fixed_code}};
        f << j.dump() << "\n";
    }
    if (!f)
        throw IoError("write failed: " + path);
}

std::tuple<Dataset, Dataset, Dataset>
split(const Dataset& dataset, double train_frac, double eval_frac,
      double test_frac, std::uint64_t seed) {
    double sum = train_frac + eval_frac + test_frac;
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ArgumentError("split fractions must sum to 1, got " +
                            std::to_string(sum));
    const size_t n = dataset.records.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    size_t n_train = static_cast<size_t>(std::floor(train_frac * double(n)));
    size_t n_eval = static_cast<size_t>(std::floor(eval_frac * double(n)));
    size_t n_test = static_cast<size_t>(std::floor(test_frac * double(n)));
    size_t rest = n - n_train - n_eval - n_test;
    // Remainders go train -> eval -> test.
    while (rest > 0) {
        ++n_train;
        --rest;
        if (rest > 0) { ++n_eval; --rest; }
        if (rest > 0) { ++n_test; --rest; }
    }

    Dataset train{.records = {}, .split_tag = SplitTag::train};
    Dataset eval{.records = {}, .split_tag = SplitTag::eval};
    Dataset test{.records = {}, .split_tag = SplitTag::test};
    for (size_t i = 0; i < n; ++i) {
        const auto& r = dataset.records[order[i]];
        if (i < n_train)
            train.records.push_back(r);
        else if (i < n_train + n_eval)
            eval.records.push_back(r);
        else
            test.records.push_back(r);
    }
    return {std::move(train), std::move(eval), std::move(test)};
}

} // namespace sargam
