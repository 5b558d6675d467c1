#pragma once

#include <string>
#include <vector>

#include "sargam/tokenize.hpp"

namespace sargam {

struct DistanceSample {
    std::vector<double> values; // each in [0,1]
    std::string label;
};

struct TestResult {
    double z_statistic = 0.0;
    double p_value = 1.0;
    double wasserstein = 0.0;
};

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;
    long count = 0;
};

// Token-level equality after canonical tokenization.
bool exact_match(const TokenSequence& candidate, const TokenSequence& target);
bool exact_match_text(const std::string& candidate, const std::string& target);

// Fraction of records whose first k candidates contain an exact match.
double topk_accuracy(
    const std::vector<std::vector<TokenSequence>>& candidates_per_record,
    const std::vector<TokenSequence>& targets, size_t k);

// Exact W1 between the empirical distributions (area between CDFs).
double wasserstein_1d(const DistanceSample& a, const DistanceSample& b);

// Welch-style two-sample z test, two-sided p via the normal CDF.
TestResult two_sample_z(const DistanceSample& a, const DistanceSample& b);

// Equal-width bins over [0,1], right-closed last bin.
std::vector<HistogramBin> histogram(const DistanceSample& sample, int bins);

// 100*(new-base)/base, rounded to 2 decimals.
double percent_improvement(double base, double next);

// |identifiers(output) \ identifiers(input)|
size_t new_identifier_count(const TokenSequence& input,
                            const TokenSequence& output);

double normal_cdf(double z);

} // namespace sargam
