#pragma once

#include <cstdint>
#include <span>

namespace flipchance {

/// Inputs of the finite-sample feasibility bound: `n` samples, probability
/// level `alpha_s` and the tightened sample level `alpha_tilde_s < alpha_s`.
struct HoeffdingQuery {
    std::int64_t n = 1;
    double alpha_s = 0.1;
    double alpha_tilde_s = 0.05;
    double gamma_unsafe = 0.995;

    double gap() const { return alpha_s - alpha_tilde_s; }
    /// Throws std::domain_error unless 0 <= alpha_tilde_s < alpha_s < 1,
    /// n >= 1 and 0 < gamma_unsafe < 1.
    void validate() const;
};

struct BoundValue {
    double value = 1.0;
    bool underflow = false;  // exponent below the double range; value is exactly 0
};

/// exp(-2 n (alpha_s - alpha_tilde_s)^2 (1 - gamma)^2): the probability that
/// the sample-average surrogate fails to certify a feasible policy.
BoundValue hoeffding_failure_bound(const HoeffdingQuery& q);

/// Smallest n with hoeffding_failure_bound <= delta.
std::int64_t required_samples(double delta, double gap, double gamma_unsafe);

/// min(1, sum of per-step violation probabilities): union bound on the
/// probability that any step is unsafe.
double boole_sum_bound(std::span<const double> marginals);

}  // namespace flipchance
