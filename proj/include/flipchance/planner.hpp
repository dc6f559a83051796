#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "flipchance/env.hpp"

namespace flipchance {

/// Settings of the penalty solver behind `plan`. Each round minimizes the
/// penalized objective with projected Gauss-Newton steps (Levenberg-Marquardt
/// damped), then multiplies the penalty weight by `penalty_growth`.
struct PlannerOpts {
    double penalty_init = 1000.0;
    double penalty_growth = 10.0;
    int penalty_rounds = 4;
    int inner_steps = 50;     // max accepted steps per round
    double damping = 1e-3;    // initial LM damping, relative to the diagonal
    double feas_tol = 1e-3;   // meters
    int restarts = 3;

    void validate() const;
};

struct PlanResult {
    std::vector<Vec2> actions;  // length = planning horizon
    std::vector<Vec2> states;   // nominal, length = horizon + 1, states[0] = start
    double objective = 0.0;     // sum_{k=1..H} |s_k - goal|^2
    double max_violation = 0.0; // worst penetration of an inflated obstacle, >= 0
    bool converged = false;     // max_violation <= feas_tol
};

class NoFeasiblePlan : public std::runtime_error {
public:
    NoFeasiblePlan(Vec2 best_effort, double violation);
    Vec2 best_effort;
    double violation;
};

/// Nominal (noise-free) trajectory of an action sequence.
std::vector<Vec2> rollout_nominal(Vec2 start, const std::vector<Vec2>& actions, double dt);

/// Worst penetration of any nominal state s_k (k >= 1) into its step-k
/// inflated obstacle. Zero when every state is outside.
double inflated_violation(const std::vector<Vec2>& states, double beta, const EnvSpec& spec);

/// Minimizes the summed squared goal distance over `horizon` steps subject to
/// the nominal dynamics, the action clamp, and the beta-inflated obstacles.
/// Never throws for infeasibility: `converged` tells the caller whether the
/// best plan over all restarts satisfies the obstacle constraints.
PlanResult plan(Vec2 start, double beta, const EnvSpec& spec, const PlannerOpts& opts, int horizon);

inline PlanResult plan(Vec2 start, double beta, const EnvSpec& spec, const PlannerOpts& opts) {
    return plan(start, beta, spec, opts, spec.horizon);
}

/// First action of `plan`; throws NoFeasiblePlan when the plan did not converge.
Vec2 first_action(Vec2 s, double beta, const EnvSpec& spec, const PlannerOpts& opts, int horizon);

inline Vec2 first_action(Vec2 s, double beta, const EnvSpec& spec, const PlannerOpts& opts) {
    return first_action(s, beta, spec, opts, spec.horizon);
}

/// Per-coordinate greedy trajectory toward the goal. With the infinity-norm
/// clamp and no obstacles the cost separates by coordinate, and moving at
/// full speed then stopping on the goal is optimal for each one.
std::vector<Vec2> greedy_actions(Vec2 start, Vec2 target, double bound, double dt, int horizon);

/// CSV rows `k,x,y,u,v`: nominal state k and the action taken there. The
/// final state has no action, so its u and v are empty.
void write_plan_csv(std::ostream& out, const PlanResult& plan);

}  // namespace flipchance
