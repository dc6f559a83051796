#include "flipchance/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flipchance {

namespace {

double exponent(double n, double gap, double gamma) {
    const double slack = 1.0 - gamma;
    return -2.0 * n * gap * gap * slack * slack;
}

}  // namespace

void HoeffdingQuery::validate() const {
    if (n < 1) throw std::domain_error("hoeffding: n must be >= 1");
    if (!(alpha_tilde_s >= 0.0 && alpha_tilde_s < alpha_s && alpha_s < 1.0))
        throw std::domain_error("hoeffding: need 0 <= alpha_tilde_s < alpha_s < 1");
    if (!(gamma_unsafe > 0.0 && gamma_unsafe < 1.0))
        throw std::domain_error("hoeffding: gamma_unsafe must lie in (0, 1)");
}

BoundValue hoeffding_failure_bound(const HoeffdingQuery& q) {
    q.validate();
    const double e = exponent(static_cast<double>(q.n), q.gap(), q.gamma_unsafe);
    const double v = std::exp(e);
    return {v, v == 0.0};
}

std::int64_t required_samples(double delta, double gap, double gamma_unsafe) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("required_samples: delta must lie in (0, 1)");
    if (!(gap > 0.0 && gap < 1.0)) throw std::domain_error("required_samples: gap must lie in (0, 1)");
    if (!(gamma_unsafe > 0.0 && gamma_unsafe < 1.0))
        throw std::domain_error("required_samples: gamma_unsafe must lie in (0, 1)");

    const double rate = -exponent(1.0, gap, gamma_unsafe);  // per-sample decay
    const double raw = std::ceil(std::log(1.0 / delta) / rate);
    if (!(raw < 9.0e18)) throw std::domain_error("required_samples: result exceeds int64 range");
    auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(raw));
    // The closed form can land one off after rounding; settle on the exact
    // smallest n for the bound as evaluated in floating point.
    auto bound_at = [&](std::int64_t m) { return std::exp(exponent(static_cast<double>(m), gap, gamma_unsafe)); };
    while (bound_at(n) > delta) ++n;
    while (n > 1 && bound_at(n - 1) <= delta) --n;
    return n;
}

double boole_sum_bound(std::span<const double> marginals) {
    double sum = 0.0;
    for (double p : marginals) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("boole_sum_bound: marginals must lie in [0, 1]");
        sum += p;
    }
    return std::min(1.0, sum);
}

}  // namespace flipchance
