#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "flipchance/bounds.hpp"
#include "flipchance/tabular.hpp"
#include "oracles.hpp"

using namespace flipchance;
using namespace flipchance::tabular;

namespace {

const std::string kData = FLIPCHANCE_DATA;

Ccmdp instance(const std::string& name) { return load_instance(kData + "/instances/" + name + ".txt"); }

}  // namespace

TEST(Exact, MatchesTrajectoryEnumeration) {
    Stream rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const Ccmdp m = oracle::random_instance(rng, 4, 3, 4);
        PolicyTable pi{m.horizon, m.n_states, std::vector<int>(static_cast<size_t>(m.horizon) * m.n_states)};
        for (auto& a : pi.actions) a = static_cast<int>(rng.uniform() * m.n_actions);
        const double gamma = 0.5 + 0.49 * rng.uniform();
        const ExactEval ev = exact_eval(m, pi, gamma);
        const auto want = oracle::enumerate_trajectories(m, pi, gamma);
        EXPECT_NEAR(ev.j, want.j, 1e-10);
        EXPECT_NEAR(ev.f_joint, want.f_joint, 1e-10);
        EXPECT_NEAR(ev.h_ecsc, want.h_ecsc, 1e-10);
        ASSERT_EQ(ev.marginals.size(), want.marginals.size());
        for (size_t k = 0; k < ev.marginals.size(); ++k) EXPECT_NEAR(ev.marginals[k], want.marginals[k], 1e-10);
    }
}

TEST(Exact, ConservativeChain) {
    Stream rng(102);
    for (int trial = 0; trial < 200; ++trial) {
        const Ccmdp m = oracle::random_instance(rng, 4, 3, 5);
        PolicyTable pi{m.horizon, m.n_states, std::vector<int>(static_cast<size_t>(m.horizon) * m.n_states)};
        for (auto& a : pi.actions) a = static_cast<int>(rng.uniform() * m.n_actions);
        const double gamma = 0.5 + 0.49 * rng.uniform();
        const ExactEval ev = exact_eval(m, pi, gamma);
        const double violation = 1.0 - ev.f_joint;
        EXPECT_LE(violation, boole_sum_bound(ev.marginals) + 1e-12);
        double sum = 0;
        for (double x : ev.marginals) sum += x;
        EXPECT_NEAR(ev.marginal_sum, sum, 1e-12);
        EXPECT_GE(ev.h_ecsc, std::pow(gamma, m.horizon) * violation - 1e-12);
        EXPECT_LE(ev.h_ecsc, ev.marginal_sum + 1e-12);
        // every violating trajectory accumulates at least gamma^T
        const auto t = oracle::enumerate_trajectories(m, pi, gamma);
        if (std::isfinite(t.min_discounted_given_violation)) {
            EXPECT_GE(t.min_discounted_given_violation, std::pow(gamma, m.horizon) - 1e-15);
        }
    }
}

TEST(Enumeration, Counts) {
    Ccmdp m;
    m.n_states = 1;
    m.n_actions = 2;
    m.horizon = 1;
    EXPECT_EQ(policy_count(m), 2u);
    m.n_states = 2;
    m.horizon = 2;
    EXPECT_EQ(policy_count(m), 16u);
    m.n_actions = 3;
    m.n_states = 3;
    EXPECT_EQ(policy_count(m), 729u);
    EXPECT_EQ(enumerate_policies(m).size(), 729u);
    m.n_states = 10;
    m.horizon = 20;
    EXPECT_THROW(policy_count(m), InstanceTooLarge);
}

TEST(Enumeration, DistinctTables) {
    Ccmdp m;
    m.n_states = 2;
    m.n_actions = 3;
    m.horizon = 2;
    const auto all = enumerate_policies(m);
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = i + 1; j < all.size(); ++j) ASSERT_FALSE(all[i] == all[j]);
}

TEST(Deterministic, MatchesBruteForce) {
    Stream rng(103);
    for (int trial = 0; trial < 200; ++trial) {
        const Ccmdp m = oracle::random_instance(rng, 3, 3, 3);
        const Constraint c{trial % 2 ? ConstraintKind::Joint : ConstraintKind::Ecsc, m.alpha, 0.9};
        double best = -1e300;
        for (const auto& p : enumerate_policies(m)) {
            const auto t = oracle::enumerate_trajectories(m, p, c.gamma_unsafe);
            const double risk = c.kind == ConstraintKind::Joint ? 1.0 - t.f_joint : t.h_ecsc;
            if (risk <= c.alpha) best = std::max(best, t.j);
        }
        if (best == -1e300) {
            EXPECT_THROW(optimal_deterministic(m, c), NoFeasiblePolicy);
            continue;
        }
        const auto opt = optimal_deterministic(m, c);
        EXPECT_NEAR(opt.eval.j, best, 1e-9);
        const auto mix = optimal_mixture(m, c);
        EXPECT_GE(mix.value, opt.eval.j - 1e-9);
        EXPECT_LE(mix.value, value_iteration_optimum(m) + 1e-9);
    }
}

TEST(Mixture, MatchesGridOracle) {
    Stream rng(104);
    int checked = 0;
    while (checked < 60) {
        const Ccmdp m = oracle::random_instance(rng, 3, 2, 2);
        if (policy_count(m) > 16) continue;
        for (auto kind : {ConstraintKind::Joint, ConstraintKind::Ecsc}) {
            const Constraint c{kind, m.alpha, 0.95};
            const auto pts = exact_frontier(m, c);
            const double want = oracle::grid_lp(pts, c.alpha, 2000);
            if (!std::isfinite(want)) {
                EXPECT_THROW(optimal_mixture(m, c), Infeasible);
                continue;
            }
            const auto mix = optimal_mixture(m, c);
            double spread = 0;
            for (const auto& p : pts) spread = std::max(spread, std::abs(p.value));
            EXPECT_GE(mix.value, want - 1e-9);
            EXPECT_LE(mix.value, want + 2 * spread / 2000 + 1e-9);
            // the support reproduces the value and respects the constraint
            double v = 0, risk = 0;
            for (const auto& s : mix.lp.support) {
                v += s.weight * mix.evals[s.index].j;
                risk += s.weight * c.risk(mix.evals[s.index]);
            }
            EXPECT_NEAR(v, mix.value, 1e-9);
            EXPECT_LE(risk, c.alpha + 1e-9);
        }
        ++checked;
    }
}

TEST(Mixture, UnconstrainedEqualsValueIteration) {
    Stream rng(105);
    for (int trial = 0; trial < 100; ++trial) {
        Ccmdp m = oracle::random_instance(rng, 3, 3, 3);
        const auto mix = optimal_mixture(m, {ConstraintKind::Joint, 1.0, 0.9});
        const auto det = optimal_deterministic(m, {ConstraintKind::Joint, 1.0, 0.9});
        EXPECT_NEAR(det.eval.j, value_iteration_optimum(m), 1e-9);
        EXPECT_NEAR(mix.value, value_iteration_optimum(m), 1e-9);
    }
}

TEST(Instances, Riskless) {
    const Ccmdp m = instance("riskless");
    const auto det = optimal_deterministic(m, {ConstraintKind::Joint, 0.0, 0.995});
    const auto mix = optimal_mixture(m, {ConstraintKind::Joint, 0.0, 0.995});
    EXPECT_NEAR(det.eval.j, 1.6, 1e-12);
    EXPECT_NEAR(mix.value, 1.6, 1e-12);
    EXPECT_EQ(det.eval.f_joint, 1.0);
}

TEST(Instances, StrictlyConvexGain) {
    const Ccmdp m = instance("strictly_convex");
    const Constraint c{ConstraintKind::Joint, m.alpha, 0.995};
    const auto det = optimal_deterministic(m, c);
    const auto mix = optimal_mixture(m, c);
    EXPECT_NEAR(det.eval.j, 1.8, 1e-12);
    EXPECT_NEAR(mix.value, 2.0, 1e-12);
    ASSERT_EQ(mix.lp.support.size(), 2u);
    EXPECT_NEAR(mix.lp.support[0].weight, 0.5, 1e-12);
}

TEST(Instances, GridHazard) {
    const Ccmdp m = instance("grid_hazard");
    EXPECT_EQ(policy_count(m), 531441u);
    const auto det = optimal_deterministic(m, {ConstraintKind::Joint, m.alpha, 0.995});
    const auto mix = optimal_mixture(m, {ConstraintKind::Joint, m.alpha, 0.995});
    EXPECT_GT(mix.value, det.eval.j + 0.1);
    EXPECT_LE(1.0 - det.eval.f_joint, m.alpha);
}

TEST(Conservative, Examples) {
    const Ccmdp m = instance("strictly_convex");
    PolicyTable pi{1, 2, {2, 0}};
    const auto r = conservative_check(m, pi, 0.9, 0.25);
    EXPECT_NEAR(r.violation, 0.25, 1e-15);
    EXPECT_NEAR(r.h_ecsc, 0.225, 1e-15);
    EXPECT_NEAR(r.marginal_sum, 0.25, 1e-15);
    EXPECT_TRUE(r.ecsc_satisfied);
    EXPECT_TRUE(r.joint_satisfied);
    const auto tight = conservative_check(m, pi, 0.9, 0.2);
    EXPECT_FALSE(tight.ecsc_satisfied);
    EXPECT_FALSE(tight.joint_satisfied);
}

TEST(Conservative, EcscFeasibleImpliesJointFeasibleWithGammaSlack) {
    // gamma^T * violation <= h_ecsc, so h_ecsc <= gamma^T alpha forces violation <= alpha
    Stream rng(106);
    for (int trial = 0; trial < 200; ++trial) {
        const Ccmdp m = oracle::random_instance(rng, 4, 3, 4);
        PolicyTable pi{m.horizon, m.n_states, std::vector<int>(static_cast<size_t>(m.horizon) * m.n_states)};
        for (auto& a : pi.actions) a = static_cast<int>(rng.uniform() * m.n_actions);
        const double gamma = 0.9;
        const auto r = conservative_check(m, pi, gamma, m.alpha);
        if (r.h_ecsc <= std::pow(gamma, m.horizon) * m.alpha) {
            EXPECT_LE(r.violation, m.alpha + 1e-12);
        }
    }
}

TEST(InstanceIo, RoundTrip) {
    Stream rng(107);
    for (int trial = 0; trial < 20; ++trial) {
        const Ccmdp m = oracle::random_instance(rng, 4, 3, 4);
        std::ostringstream out;
        write_instance(out, m);
        std::istringstream in(out.str());
        const Ccmdp back = parse_instance(in);
        EXPECT_EQ(back.n_states, m.n_states);
        EXPECT_EQ(back.horizon, m.horizon);
        EXPECT_EQ(back.alpha, m.alpha);
        EXPECT_EQ(back.safe, m.safe);
        EXPECT_EQ(back.transition, m.transition);
        EXPECT_EQ(back.reward, m.reward);
    }
}

TEST(InstanceIo, Rejects) {
    auto bad = [](const std::string& text) {
        std::istringstream in(text);
        return parse_instance(in);
    };
    const std::string head = "states 2\nactions 1\nhorizon 1\nstart 0\nalpha 0.1\nsafe 1 0\n";
    EXPECT_NO_THROW(bad(head + "0 0 | 1 0 | 1\n1 0 | 0 1 | 0\n"));
    EXPECT_THROW(bad(head + "0 0 | 0.5 0.4 | 1\n1 0 | 0 1 | 0\n"), std::invalid_argument);  // row sum
    EXPECT_THROW(bad(head + "0 0 | 1 0 | 1\n"), std::invalid_argument);  // missing row
    EXPECT_THROW(bad(head + "0 0 | -1 2 | 1\n1 0 | 0 1 | 0\n"), std::invalid_argument);  // negative
    EXPECT_THROW(bad("states 2\nbogus 1\n"), std::invalid_argument);
    EXPECT_THROW(load_instance("/nonexistent.txt"), std::ios_base::failure);
}
