"""Randomized two-policy mixtures for chance-constrained navigation."""

from ._flipchance import (  # noqa: F401
    EnvSpec,
    Infeasible,
    InstanceTooLarge,
    McReport,
    NoFeasiblePlan,
    PlannerOpts,
    Sweep,
    binomial_ci,
    envelope_value,
    hoeffding_failure_bound,
    inflated_radius,
    plan,
    required_samples,
    reward,
    safety_value,
    solve_mixture_lp,
    step,
    sweep,
    tabular_optimum,
)

__version__ = "0.1.0"
