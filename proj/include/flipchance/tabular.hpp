#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "flipchance/mixture_lp.hpp"

namespace flipchance::tabular {

/// Tiny finite chance-constrained MDP with a deterministic start state.
struct Ccmdp {
    int n_states = 0;
    int n_actions = 0;
    int horizon = 1;
    int start = 0;
    double alpha = 0.0;
    std::vector<double> transition;  // [s][a][s'], row-major
    std::vector<double> reward;      // [s][a]
    std::vector<bool> safe;          // [s]

    double p(int s, int a, int next) const { return transition[(s * n_actions + a) * n_states + next]; }
    double r(int s, int a) const { return reward[s * n_actions + a]; }

    /// Throws std::invalid_argument on malformed tables or an unsafe start.
    void validate() const;
};

/// Time-indexed deterministic policy: action = at(k, s) for k < horizon.
struct PolicyTable {
    int horizon = 0;
    int n_states = 0;
    std::vector<int> actions;  // [k][s]

    int at(int k, int s) const { return actions[k * n_states + s]; }
    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

struct ExactEval {
    double j = 0.0;             // expected reward summed over k = 0..T-1
    double f_joint = 1.0;       // P(s_1..s_T all safe)
    double h_ecsc = 0.0;        // E sum_{i=1..T} gamma^i 1(s_i unsafe)
    double marginal_sum = 0.0;  // sum_i P(s_i unsafe)
    std::vector<double> marginals;  // P(s_i unsafe), i = 1..T
};

class InstanceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoFeasiblePolicy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kMaxPolicies = 10'000'000;

/// Exact forward recursion over state distributions.
ExactEval exact_eval(const Ccmdp& mdp, const PolicyTable& policy, double gamma_unsafe);

/// n_actions^(n_states * horizon); throws InstanceTooLarge above kMaxPolicies.
std::uint64_t policy_count(const Ccmdp& mdp);

/// Visits every time-indexed deterministic policy once, in lexicographic
/// order of the flattened [k][s] action table.
class PolicyEnumerator {
public:
    explicit PolicyEnumerator(const Ccmdp& mdp);
    /// Writes the next policy; false when exhausted.
    bool next(PolicyTable& out);
    std::uint64_t count() const { return count_; }

private:
    PolicyTable current_;
    int n_actions_;
    std::uint64_t count_;
    std::uint64_t emitted_ = 0;
};

std::vector<PolicyTable> enumerate_policies(const Ccmdp& mdp);

enum class ConstraintKind { Joint, Ecsc };

/// Joint: 1 - f_joint <= alpha. Ecsc: h_ecsc <= alpha.
struct Constraint {
    ConstraintKind kind = ConstraintKind::Joint;
    double alpha = 0.0;
    double gamma_unsafe = 0.995;

    double risk(const ExactEval& e) const { return kind == ConstraintKind::Joint ? 1.0 - e.f_joint : e.h_ecsc; }
};

struct DeterministicOptimum {
    PolicyTable policy;
    ExactEval eval;
    std::uint64_t index = 0;  // enumeration position
};

/// Best enumerated policy meeting the constraint. Throws NoFeasiblePolicy.
DeterministicOptimum optimal_deterministic(const Ccmdp& mdp, const Constraint& c);

struct MixtureOptimum {
    LpSolution lp;                      // support indices refer to `policies`
    std::vector<PolicyTable> policies;  // the support members
    std::vector<ExactEval> evals;
    double value = 0.0;
};

/// Mixture LP over the exact frontier of all enumerated policies.
/// Throws Infeasible.
MixtureOptimum optimal_mixture(const Ccmdp& mdp, const Constraint& c);

/// (risk, reward) of every enumerated policy, in enumeration order.
std::vector<RiskReward> exact_frontier(const Ccmdp& mdp, const Constraint& c);

struct ConservativeReport {
    double h_ecsc = 0.0;
    double marginal_sum = 0.0;
    double violation = 0.0;  // 1 - f_joint
    bool ecsc_satisfied = false;
    bool joint_satisfied = false;
};

ConservativeReport conservative_check(const Ccmdp& mdp, const PolicyTable& policy, double gamma_unsafe,
                                      double alpha);

/// Unconstrained finite-horizon optimum by backward induction.
double value_iteration_optimum(const Ccmdp& mdp);

/// Plain-text instance format:
///   states N / actions M / horizon T / start s / alpha a / safe b_0 .. b_{N-1}
///   then one line per (s, a):   s a | p_0 .. p_{N-1} | reward
/// '#' starts a comment.
Ccmdp parse_instance(std::istream& in, const std::string& source = "<stream>");
Ccmdp load_instance(const std::string& path);
void write_instance(std::ostream& out, const Ccmdp& mdp);

}  // namespace flipchance::tabular
