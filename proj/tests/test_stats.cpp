#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sargam/errors.hpp"
#include "sargam/stats.hpp"

using namespace sargam;

namespace {

DistanceSample sample(std::vector<double> v) {
    return DistanceSample{std::move(v), "test"};
}

std::vector<double> random_values(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Equal-size special case of W1: mean absolute difference of the sorted
// samples.
double w1_equal_size(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s / double(a.size());
}

} // namespace

TEST_CASE("exact_match token and text forms") {
    CHECK(exact_match({"return", "b", ";"}, {"return", "b", ";"}));
    CHECK_FALSE(exact_match({"return", "b", ";"}, {"return", "c", ";"}));
    CHECK(exact_match_text("return  b ;", "return b ;"));
    CHECK(exact_match_text("", ""));
    CHECK_FALSE(exact_match_text("return b ;", "return b"));
}

TEST_CASE("topk_accuracy") {
    std::vector<TokenSequence> targets = {{"a"}, {"b"}, {"c"}};
    std::vector<std::vector<TokenSequence>> perfect = {
        {{"a"}}, {{"b"}}, {{"c"}}};
    CHECK(topk_accuracy(perfect, targets, 1) == 1.0);

    std::vector<std::vector<TokenSequence>> mixed = {
        {{"x"}, {"a"}},   // hit at rank 2
        {{"b"}},          // hit at rank 1
        {},               // empty list counts as a miss
    };
    CHECK(topk_accuracy(mixed, targets, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(topk_accuracy(mixed, targets, 5) == doctest::Approx(2.0 / 3.0));

    std::mt19937_64 rng(21);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::vector<TokenSequence>> cands(4);
        std::vector<TokenSequence> tg(4);
        for (int r = 0; r < 4; ++r) {
            tg[r] = {"t" + std::to_string(rng() % 3)};
            for (int c = 0; c < 3; ++c)
                cands[r].push_back({"t" + std::to_string(rng() % 3)});
        }
        CHECK(topk_accuracy(cands, tg, 5) >= topk_accuracy(cands, tg, 1));
    }
}

TEST_CASE("wasserstein_1d pinned values") {
    CHECK(wasserstein_1d(sample({0.3, 0.7}), sample({0.3, 0.7})) == 0.0);
    CHECK(wasserstein_1d(sample({0.0}), sample({1.0})) == 1.0);
    CHECK(wasserstein_1d(sample({0.0, 1.0}), sample({0.5, 0.5})) ==
          doctest::Approx(0.5));
    CHECK_THROWS_AS(wasserstein_1d(sample({}), sample({0.5})), ArgumentError);
}

TEST_CASE("wasserstein_1d equal-size oracle and metric properties") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 100; ++t) {
        auto a = random_values(rng, 17);
        auto b = random_values(rng, 17);
        CHECK(wasserstein_1d(sample(a), sample(b)) ==
              doctest::Approx(w1_equal_size(a, b)).epsilon(1e-9));
    }
    for (int t = 0; t < 100; ++t) {
        auto a = sample(random_values(rng, 9));
        auto b = sample(random_values(rng, 13));
        auto c = sample(random_values(rng, 7));
        double ab = wasserstein_1d(a, b);
        CHECK(ab == doctest::Approx(wasserstein_1d(b, a)));
        CHECK(wasserstein_1d(a, c) <= ab + wasserstein_1d(b, c) + 1e-12);
    }
}

TEST_CASE("two_sample_z") {
    auto a = sample({0.1, 0.4, 0.9, 0.2});
    TestResult same = two_sample_z(a, a);
    CHECK(same.z_statistic == doctest::Approx(0.0));
    CHECK(same.p_value == doctest::Approx(1.0));

    CHECK_THROWS_AS(two_sample_z(sample({0, 0, 0, 0}), sample({1, 1, 1, 1})),
                    DegenerateSampleError);

    // Direct formula evaluation as the oracle.
    std::vector<double> av, bv;
    for (int i = 0; i < 500; ++i) {
        av.push_back(i % 2 ? 1.0 : 0.0);
        bv.push_back(i % 2 ? 1.1 : 0.1);
    }
    TestResult r = two_sample_z(sample(av), sample(bv));
    double var = 0.25 * 500.0 / 499.0; // sample variance of a 0/1 split
    double expect_z = (0.5 - 0.6) / std::sqrt(var / 500.0 + var / 500.0);
    CHECK(r.z_statistic == doctest::Approx(expect_z).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(2.0 * (1.0 - normal_cdf(
                           std::fabs(expect_z)))).epsilon(1e-9));

    TestResult swapped = two_sample_z(sample(bv), sample(av));
    CHECK(swapped.z_statistic == doctest::Approx(-r.z_statistic));
    CHECK(swapped.p_value == doctest::Approx(r.p_value));
}

TEST_CASE("histogram") {
    auto h = histogram(sample({0.0}), 10);
    REQUIRE(h.size() == 10);
    CHECK(h[0].count == 1);
    for (int i = 1; i < 10; ++i) CHECK(h[i].count == 0);

    auto h2 = histogram(sample({0.05, 0.15, 0.95}), 10);
    CHECK(h2[0].count == 1);
    CHECK(h2[1].count == 1);
    CHECK(h2[9].count == 1);

    // 1.0 lands in the right-closed last bin.
    auto h3 = histogram(sample({1.0}), 4);
    CHECK(h3[3].count == 1);

    std::mt19937_64 rng(23);
    auto values = random_values(rng, 137);
    auto h4 = histogram(sample(values), 7);
    long total = 0;
    for (const auto& b : h4) total += b.count;
    CHECK(total == 137);
}

TEST_CASE("percent_improvement pinned table values") {
    CHECK(percent_improvement(29.99, 33.96) == doctest::Approx(13.24));
    CHECK(percent_improvement(23.02, 25.27) == doctest::Approx(9.77));
    CHECK(percent_improvement(42.0, 42.0) == 0.0);
    CHECK_THROWS_AS(percent_improvement(0.0, 1.0), ArgumentError);
}

TEST_CASE("new_identifier_count") {
    CHECK(new_identifier_count({"a", "=", "b"}, {"a", "=", "c"}) == 1);
    CHECK(new_identifier_count({"a", "b"}, {"b", "a"}) == 0);
    CHECK(new_identifier_count({"a"}, {}) == 0);
    CHECK(new_identifier_count({}, {"int", "x", "0"}) == 1); // keyword+number skipped
}
