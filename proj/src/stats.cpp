#include "sargam/stats.hpp"

#include <algorithm>
#include <cmath>

#include "sargam/errors.hpp"
#include "sargam/editalg.hpp"

namespace sargam {

bool exact_match(const TokenSequence& candidate, const TokenSequence& target) {
    return candidate == target;
}

bool exact_match_text(const std::string& candidate,
                      const std::string& target) {
    return tokenize(candidate) == tokenize(target);
}

double topk_accuracy(
    const std::vector<std::vector<TokenSequence>>& candidates_per_record,
    const std::vector<TokenSequence>& targets, size_t k) {
    if (k == 0)
        throw ArgumentError("topk_accuracy: k must be >= 1");
    if (candidates_per_record.size() != targets.size())
        throw ArgumentError("topk_accuracy: size mismatch");
    if (targets.empty())
        return 0.0;
    size_t hits = 0;
    for (size_t r = 0; r < targets.size(); ++r) {
        const auto& cands = candidates_per_record[r];
        size_t limit = std::min(k, cands.size());
        for (size_t i = 0; i < limit; ++i) {
            if (exact_match(cands[i], targets[r])) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double wasserstein_1d(const DistanceSample& a, const DistanceSample& b) {
    if (a.values.empty() || b.values.empty())
        throw ArgumentError("wasserstein_1d: empty sample");
    std::vector<double> sa = a.values, sb = b.values;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<double> all;
    all.reserve(sa.size() + sb.size());
    all.insert(all.end(), sa.begin(), sa.end());
    all.insert(all.end(), sb.begin(), sb.end());
    std::sort(all.begin(), all.end());
    double w = 0.0;
    size_t ia = 0, ib = 0;
    for (size_t i = 0; i + 1 < all.size(); ++i) {
        while (ia < sa.size() && sa[ia] <= all[i])
            ++ia;
        while (ib < sb.size() && sb[ib] <= all[i])
            ++ib;
        double fa = static_cast<double>(ia) / static_cast<double>(sa.size());
        double fb = static_cast<double>(ib) / static_cast<double>(sb.size());
        w += std::fabs(fa - fb) * (all[i + 1] - all[i]);
    }
    return w;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

TestResult two_sample_z(const DistanceSample& a, const DistanceSample& b) {
    const size_t na = a.values.size(), nb = b.values.size();
    if (na < 2 || nb < 2)
        throw ArgumentError("two_sample_z: each sample needs n >= 2");
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    };
    auto var = [&](const std::vector<double>& v, double m) {
        double s = 0;
        for (double x : v)
            s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
    };
    double ma = mean(a.values), mb = mean(b.values);
    double va = var(a.values, ma), vb = var(b.values, mb);
    double pooled = va / static_cast<double>(na) +
                    vb / static_cast<double>(nb);
    if (pooled <= 0.0)
        throw DegenerateSampleError("two_sample_z: zero pooled variance");
    TestResult r;
    r.z_statistic = (ma - mb) / std::sqrt(pooled);
    r.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(r.z_statistic)));
    r.wasserstein = wasserstein_1d(a, b);
    return r;
}

std::vector<HistogramBin> histogram(const DistanceSample& sample, int bins) {
    if (bins < 1)
        throw ArgumentError("histogram: bins must be >= 1");
    std::vector<HistogramBin> out(static_cast<size_t>(bins));
    double width = 1.0 / bins;
    for (int i = 0; i < bins; ++i) {
        out[static_cast<size_t>(i)].low = i * width;
        out[static_cast<size_t>(i)].high = (i + 1) * width;
    }
    for (double v : sample.values) {
        int idx = static_cast<int>(std::floor(v * bins));
        idx = std::clamp(idx, 0, bins - 1); // v == 1 lands in the last bin
        ++out[static_cast<size_t>(idx)].count;
    }
    return out;
}

double percent_improvement(double base, double next) {
    if (base == 0.0)
        throw ArgumentError("percent_improvement: base must be nonzero");
    double raw = 100.0 * (next - base) / base;
    return std::round(raw * 100.0) / 100.0;
}

size_t new_identifier_count(const TokenSequence& input,
                            const TokenSequence& output) {
    auto in_ids = identifiers(input);
    auto out_ids = identifiers(output);
    size_t n = 0;
    for (const auto& id : out_ids)
        if (!in_ids.count(id))
            ++n;
    return n;
}

} // namespace sargam
