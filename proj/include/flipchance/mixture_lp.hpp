#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace flipchance {

/// One candidate policy summarized by its risk (violation probability, or
/// expected discounted unsafety) and its expected reward.
struct RiskReward {
    double risk = 0.0;
    double value = 0.0;
};

struct LpSupport {
    std::size_t index = 0;
    double weight = 0.0;
};

/// Optimum of  max sum_i w_i value_i  s.t.  sum_i w_i risk_i <= limit,
/// sum_i w_i = 1, w >= 0.  The support holds one or two entries; for two,
/// the lower-risk member comes first.
struct LpSolution {
    std::vector<LpSupport> support;
    double value = 0.0;
    double risk = 0.0;             // sum_i w_i risk_i at the optimum
    bool active_constraint = false; // risk == limit
};

class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact solver by vertex enumeration: an optimal basic solution of a
/// two-row LP has at most two nonzeros, so it is either a feasible singleton
/// or a pair straddling the limit with the risk constraint tight. Ties go
/// to the smaller support, then to the lexicographically smallest indices.
/// Throws Infeasible when every risk exceeds `limit`.
LpSolution solve_mixture_lp(std::span<const RiskReward> points, double limit);

struct EnvelopeVertex {
    double risk = 0.0;
    double value = 0.0;
    std::size_t index = 0;  // position in the input
};

/// Upper chain of the planar convex hull of the points, sorted by risk.
/// Collinear interior points are dropped; at equal risk the highest value
/// (then the lowest index) is kept.
std::vector<EnvelopeVertex> concave_envelope(std::span<const RiskReward> points);

/// Best envelope value at risk <= alpha. Past the envelope's peak this is the
/// peak value; it is what the mixture LP attains. Throws Infeasible when
/// alpha is below the smallest risk.
double envelope_value(std::span<const EnvelopeVertex> envelope, double alpha);

}  // namespace flipchance
