#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bpre/analysis.hpp"
#include "test_support.hpp"

using namespace bpre;
using bpre::testing::binary;
using bpre::testing::geometric_like;

namespace {

const EnvStream& env_b() {
    static const EnvStream e(ConstantEnv{binary()});
    return e;
}

const EnvStream& env_mix() {
    static const EnvStream e(bpre::testing::mixture_spec(7));
    return e;
}

}  // namespace

TEST(Survival, BinaryGoldens) {
    const double expected[] = {0.5, 3.0 / 8.0, 39.0 / 128.0};
    for (std::size_t m = 1; m <= 3; ++m) {
        const auto t = survival_exact(env_b(), m);
        EXPECT_NEAR(t.survival, expected[m - 1], 1e-12);
        EXPECT_NEAR(t.survival_phi, expected[m - 1], 1e-12);
        EXPECT_NEAR(survival_forward(env_b(), m), expected[m - 1], 1e-12);
        EXPECT_DOUBLE_EQ(t.q[m], 0.0);
    }
}

TEST(Survival, PeriodicGolden) {
    const EnvStream env(PeriodicEnv{{binary(), geometric_like()}});
    const auto t = survival_exact(env, 2);
    EXPECT_NEAR(t.survival, 15.0 / 32.0, 1e-12);
    EXPECT_NEAR(t.survival_phi, 15.0 / 32.0, 1e-12);
}

TEST(Survival, DiracOneNeverDies) {
    const EnvStream env(ConstantEnv{pmf_new({0, 1})});
    const auto t = survival_exact(env, 50);
    EXPECT_DOUBLE_EQ(t.survival, 1.0);
    EXPECT_DOUBLE_EQ(t.survival_phi, 1.0);
}

TEST(Survival, RejectsSubcriticalAndZeroHorizon) {
    const EnvStream env(ConstantEnv{pmf_new({0.5, 0.5})});
    EXPECT_THROW(survival_exact(env, 3), Error);
    EXPECT_THROW(survival_exact(env_b(), 0), Error);
}

TEST(Survival, MatchesForwardOracleOnRandomEnvironments) {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<OffspringDist> period;
        const std::size_t len = 1 + rng.below(4);
        for (std::size_t i = 0; i < len; ++i) period.push_back(bpre::testing::random_critical(rng, 2 + rng.below(2)));
        const EnvStream env(PeriodicEnv{period});
        for (std::size_t m = 1; m <= 5; ++m) {
            const auto t = survival_exact(env, m);
            const double oracle = survival_forward(env, m, 1 << 12);
            ASSERT_NEAR(t.survival, oracle, 1e-12);
            ASSERT_NEAR(t.survival_phi, oracle, 1e-10);
        }
    }
    for (std::size_t m = 1; m <= 8; ++m) {
        ASSERT_NEAR(survival_exact(env_mix(), m).survival, survival_forward(env_mix(), m), 1e-12);
    }
}

TEST(Survival, TwoRoutesAgreeOverLongHorizons) {
    for (const EnvStream* env : {&env_b(), &env_mix()}) {
        for (std::size_t m : {1u, 2u, 7u, 50u, 333u, 1000u, 4096u, 10000u}) {
            const auto t = survival_exact(*env, m);
            ASSERT_NEAR(t.survival, t.survival_phi, 1e-10) << "m=" << m;
        }
    }
}

TEST(Survival, CurveMatchesTableAndDecreases) {
    const auto curve = survival_curve(env_mix(), 300);
    for (std::size_t m = 1; m <= 300; ++m) {
        ASSERT_LE(curve[m], curve[m - 1]);
        if (m % 37 == 0) {
            ASSERT_NEAR(curve[m], survival_exact(env_mix(), m).survival, 1e-14);
        }
    }
}

TEST(Survival, KolmogorovAsymptotics) {
    const double p = survival_exact(env_b(), 1000).survival;
    EXPECT_NEAR(1000 * p, 2.0, 0.1);
}

TEST(Kolmogorov, BoundExample) {
    const auto b = kolmogorov_bounds(10, 0.5, 1.0);
    EXPECT_DOUBLE_EQ(b.lower, 0.05);
    EXPECT_DOUBLE_EQ(b.upper, 0.8);
    EXPECT_THROW(kolmogorov_bounds(0, 0.5, 1.0), Error);
}

TEST(Kolmogorov, SandwichHoldsFromModestHeights) {
    const auto rb = check_kolmogorov_sandwich(env_b(), 100, 10000, 0.5, 1.0);
    EXPECT_TRUE(rb.holds_in_range);
    ASSERT_TRUE(rb.threshold.has_value());
    EXPECT_LE(*rb.threshold, 100u);
    EXPECT_LE(rb.max_lower_ratio, 1.0);
    EXPECT_LE(rb.max_upper_ratio, 1.0);
    const auto rm = check_kolmogorov_sandwich(env_mix(), 100, 10000, 0.375, 0.75);
    EXPECT_TRUE(rm.holds_in_range);
    ASSERT_TRUE(rm.threshold.has_value());
    EXPECT_LE(*rm.threshold, 100u);
}

TEST(Variance, Examples) {
    EXPECT_DOUBLE_EQ(variance_exact(env_b(), 2, 0, 2), 4.0);
    EXPECT_DOUBLE_EQ(variance_exact(EnvStream(ConstantEnv{pmf_new({0, 1})}), 5, 0, 9), 0.0);
    const EnvStream periodic(PeriodicEnv{{binary(), geometric_like()}});
    EXPECT_DOUBLE_EQ(variance_exact(periodic, 2, 0, 2), 3.0);
    EXPECT_DOUBLE_EQ(variance_exact(periodic, 10, 0, 20), 150.0);
    EXPECT_DOUBLE_EQ(variance_exact(periodic, 1, 1, 1), 0.5);
}

TEST(Doob, BoundAndEmpirical) {
    EXPECT_DOUBLE_EQ(doob_bound(env_b(), 1, 0, 1, 2.0), 1.0);
    EXPECT_THROW(doob_bound(env_b(), 1, 0, 1, 0.0), Error);
    const auto c = doob_empirical(env_b(), 100, 0, 4, 100.0, 20000, 5);
    EXPECT_DOUBLE_EQ(c.bound, 0.16);
    EXPECT_TRUE(c.within);
    EXPECT_LT(c.probability, 0.16);
}

TEST(Conditions, ConstantBinaryPassesEverything) {
    const auto r = check_conditions(env_b(), 10000);
    ASSERT_EQ(r.entries.size(), 5u);
    for (const auto& e : r.entries) EXPECT_TRUE(e.pass) << e.name << " deviation " << e.deviation;
    EXPECT_DOUBLE_EQ(r.entries[0].statistic, 1.0);
    EXPECT_DOUBLE_EQ(r.entries[1].statistic, 0.5);
    EXPECT_EQ(r.windows.size(), 36u);
    EXPECT_TRUE(r.omega_trend_ok);
    EXPECT_NEAR(r.omega_averages.back().back(), 1.0 / 1.99 - 0.5, 1e-9);
}

TEST(Conditions, LargeDegreeSumVanishesBeyondThreshold) {
    const auto r = check_conditions(env_mix(), 1000);
    EXPECT_EQ(r.large_degree_zero_from, (std::vector<double>{5, 41, 401}));
    for (double s : r.large_degree_sums) EXPECT_EQ(s, 0.0);
    EXPECT_TRUE(r.entries[2].pass);
}

TEST(Conditions, QuenchedMixtureAcrossSeeds) {
    int passes = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const EnvStream env(bpre::testing::mixture_spec(seed));
        ConditionParams p;
        p.spine_seed = seed;
        const auto r = check_conditions(env, 10000, p);
        EXPECT_NEAR(r.sigma2, 0.75, 1e-12);
        EXPECT_NEAR(r.c, 0.375, 1e-12);
        passes += r.all_pass();
    }
    EXPECT_GE(passes, 19);
}

TEST(Conditions, RejectsShortPrefixAndSubcritical) {
    EXPECT_THROW(check_conditions(env_b(), 999), Error);
    const EnvStream sub(ConstantEnv{pmf_new({0.5, 0.5})});
    EXPECT_THROW(check_conditions(sub, 1000), Error);
}
