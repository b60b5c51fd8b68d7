#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bpre/rng.hpp"
#include "bpre/stats.hpp"

using namespace bpre;
using namespace bpre::stats;

TEST(Quantiles, Type7) {
    const std::vector<double> xs{4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(median(xs), 2.5);
    EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile(xs, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(median({7.0}), 7.0);
}

TEST(Summary, MatchesTwoPassFormulas) {
    const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = summarize(xs);
    EXPECT_EQ(s.n, 8u);
    EXPECT_DOUBLE_EQ(s.mean, 5.0);
    EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_NEAR(s.se, std::sqrt(32.0 / 7.0) / std::sqrt(8.0), 1e-12);
    EXPECT_DOUBLE_EQ(s.min, 2.0);
    EXPECT_DOUBLE_EQ(s.max, 9.0);
    EXPECT_DOUBLE_EQ(s.median, 4.5);
}

TEST(Ks, Examples) {
    const std::vector<double> half(100, 0.5);
    EXPECT_DOUBLE_EQ(ks_statistic(half, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.5);
    EXPECT_THROW(ks_statistic(std::vector<double>{}, normal_cdf), Error);
    EXPECT_THROW(ks_two_sample({}, {1.0}), Error);
    EXPECT_DOUBLE_EQ(ks_two_sample({1, 2, 3}, {1, 2, 3}), 0.0);
    EXPECT_DOUBLE_EQ(ks_two_sample({1, 2}, {3, 4}), 1.0);
    EXPECT_DOUBLE_EQ(ks_two_sample({1, 3}, {2, 4}), 0.5);
}

TEST(Ks, UniformSamplesRarelyExceedCriticalValue) {
    // 1.36 / sqrt(n) is the asymptotic 95% point.
    int below = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(11, {static_cast<std::uint64_t>(t)}));
        std::vector<double> u(1000);
        for (auto& x : u) x = rng.uniform();
        std::sort(u.begin(), u.end());
        below += ks_statistic(u, [](double x) { return x; }) < 1.36 / std::sqrt(1000.0);
    }
    EXPECT_GE(below, 0.92 * trials);
}

TEST(Ks, KolmogorovDistributionValues) {
    EXPECT_NEAR(kolmogorov_sf(1.358), 0.05, 1e-3);
    EXPECT_NEAR(kolmogorov_sf(1.628), 0.01, 2e-4);
    EXPECT_NEAR(kolmogorov_sf(0.5), 0.9639, 1e-4);
    EXPECT_DOUBLE_EQ(kolmogorov_sf(0.0), 1.0);
    // Both branches agree where they meet.
    EXPECT_NEAR(kolmogorov_sf(0.2999999), kolmogorov_sf(0.3000001), 1e-6);
    EXPECT_GT(ks_pvalue(0.01, 100), 0.99);
    EXPECT_LT(ks_pvalue(0.2, 1000), 1e-10);
    EXPECT_NEAR(ks_pvalue_two_sample(0.05, 1000, 1000), kolmogorov_sf((std::sqrt(500.0) + 0.12 + 0.11 / std::sqrt(500.0)) * 0.05), 1e-15);
}

TEST(Distributions, NormalAndHalfNormal) {
    EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
    EXPECT_NEAR(normal_cdf(1.959963985), 0.975, 1e-9);
    EXPECT_DOUBLE_EQ(half_normal_cdf(-1.0), 0.0);
    EXPECT_NEAR(half_normal_cdf(1.959963985), 0.95, 1e-9);
}

TEST(Correlation, Basics) {
    EXPECT_NEAR(correlation(std::vector<int>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
    EXPECT_NEAR(correlation(std::vector<int>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
    EXPECT_EQ(correlation(std::vector<int>{1, 1, 1}, std::vector<double>{3, 2, 1}), 0.0);
}

TEST(ParallelFor, ResultsIndependentOfThreadCount) {
    auto run = [](unsigned threads) {
        std::vector<std::uint64_t> out(257);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng rng(derive_seed(3, {i}));
            std::uint64_t s = 0;
            for (int k = 0; k < 100; ++k) s ^= rng();
            out[i] = s;
        });
        return out;
    };
    const auto one = run(1);
    EXPECT_EQ(one, run(4));
    EXPECT_EQ(one, run(13));
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
    try {
        parallel_for(50, 4, [](std::size_t i) {
            if (i == 7 || i == 30) throw std::runtime_error("at " + std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "at 7");
    }
}
