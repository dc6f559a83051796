#include <gtest/gtest.h>

#include <vector>

#include "flipchance/mixture_lp.hpp"
#include "flipchance/rng.hpp"
#include "oracles.hpp"

using namespace flipchance;

TEST(MixtureLp, TwoPointMix) {
    const std::vector<RiskReward> pts{{0.1, 1.0}, {0.3, 2.0}};
    const auto s = solve_mixture_lp(pts, 0.2);
    EXPECT_NEAR(s.value, 1.5, 1e-12);
    ASSERT_EQ(s.support.size(), 2u);
    EXPECT_NEAR(s.support[0].weight, 0.5, 1e-12);
    EXPECT_TRUE(s.active_constraint);
    EXPECT_DOUBLE_EQ(s.risk, 0.2);
}

TEST(MixtureLp, LooseLimitPicksBest) {
    const std::vector<RiskReward> pts{{0.1, 1.0}, {0.3, 2.0}};
    const auto s = solve_mixture_lp(pts, 0.5);
    ASSERT_EQ(s.support.size(), 1u);
    EXPECT_EQ(s.support[0].index, 1u);
    EXPECT_EQ(s.value, 2.0);
    EXPECT_FALSE(s.active_constraint);
}

TEST(MixtureLp, DominatedIgnored) {
    const std::vector<RiskReward> pts{{0.1, 1.0}, {0.2, 0.5}, {0.3, 2.0}};
    const auto s = solve_mixture_lp(pts, 0.2);
    EXPECT_NEAR(s.value, 1.5, 1e-12);
    for (const auto& e : s.support) EXPECT_NE(e.index, 1u);
}

TEST(MixtureLp, InfeasibleAndBadInput) {
    const std::vector<RiskReward> pts{{0.1, 1.0}, {0.3, 2.0}};
    EXPECT_THROW(solve_mixture_lp(pts, 0.05), Infeasible);
    EXPECT_THROW(solve_mixture_lp(std::vector<RiskReward>{}, 0.1), std::invalid_argument);
    EXPECT_THROW(solve_mixture_lp(pts, std::nan("")), std::invalid_argument);
}

TEST(MixtureLp, AgreesWithGridOracle) {
    Stream rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform() * 8);
        std::vector<RiskReward> pts(n);
        for (auto& p : pts) p = {rng.uniform(), rng.uniform() * 10};
        const double limit = rng.uniform();
        const double oracle_value = oracle::grid_lp(pts, limit, 2000);
        if (!std::isfinite(oracle_value)) {
            EXPECT_THROW(solve_mixture_lp(pts, limit), Infeasible);
            continue;
        }
        const auto s = solve_mixture_lp(pts, limit);
        EXPECT_GE(s.value, oracle_value - 1e-9);
        EXPECT_LE(s.value, oracle_value + 10.0 / 2000 + 1e-9);  // grid resolution
        EXPECT_LE(s.support.size(), 2u);
        double w = 0, risk = 0, value = 0;
        for (const auto& e : s.support) {
            w += e.weight;
            risk += e.weight * pts[e.index].risk;
            value += e.weight * pts[e.index].value;
            EXPECT_GE(e.weight, 0.0);
        }
        EXPECT_NEAR(w, 1.0, 1e-12);
        EXPECT_LE(risk, limit + 1e-12);
        EXPECT_NEAR(value, s.value, 1e-12);
    }
}

TEST(MixtureLp, EqualsEnvelope) {
    Stream rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RiskReward> pts(2 + static_cast<int>(rng.uniform() * 10));
        for (auto& p : pts) p = {rng.uniform(), rng.uniform() * 10};
        const auto env = concave_envelope(pts);
        for (int q = 0; q < 10; ++q) {
            const double a = rng.uniform();
            if (a < env.front().risk) {
                EXPECT_THROW(envelope_value(env, a), Infeasible);
                continue;
            }
            EXPECT_NEAR(solve_mixture_lp(pts, a).value, envelope_value(env, a), 1e-9);
        }
    }
}

TEST(MixtureLp, MonotoneAndAtLeastDeterministic) {
    Stream rng(31);
    std::vector<RiskReward> pts(12);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform() * 5};
    double prev = -1e300;
    for (double a = 0.0; a <= 1.0; a += 0.01) {
        double det = -1e300;
        for (const auto& p : pts)
            if (p.risk <= a) det = std::max(det, p.value);
        if (det == -1e300) continue;
        const double v = solve_mixture_lp(pts, a).value;
        EXPECT_GE(v, prev - 1e-12);
        EXPECT_GE(v, det - 1e-12);
        prev = v;
    }
}

TEST(MixtureLp, StrictGainBelowAChord) {
    // the middle point sits below the chord, so mixing the ends wins at its risk
    const std::vector<RiskReward> pts{{0.0, 0.0}, {0.5, 0.3}, {1.0, 1.0}};
    EXPECT_NEAR(solve_mixture_lp(pts, 0.5).value, 0.5, 1e-12);
}

TEST(Envelope, Examples) {
    const std::vector<RiskReward> pts{{0.0, 0.0}, {0.5, 0.3}, {1.0, 1.0}, {1.0, 0.2}};
    const auto env = concave_envelope(pts);
    ASSERT_EQ(env.size(), 2u);
    EXPECT_EQ(env[0].index, 0u);
    EXPECT_EQ(env[1].index, 2u);
    EXPECT_NEAR(envelope_value(env, 0.25), 0.25, 1e-15);
    EXPECT_EQ(envelope_value(env, 3.0), 1.0);

    // past the peak the envelope stays flat
    const std::vector<RiskReward> peaked{{0.1, 1.0}, {0.4, 3.0}, {0.8, 2.0}};
    const auto e2 = concave_envelope(peaked);
    EXPECT_EQ(envelope_value(e2, 0.6), 3.0);
    EXPECT_NEAR(envelope_value(e2, 0.25), 2.0, 1e-12);
    EXPECT_THROW(envelope_value(e2, 0.05), Infeasible);
}
