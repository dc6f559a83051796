#include "flipchance/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace flipchance {

void EnvSpec::validate() const {
    if (!start.finite() || !goal.finite()) throw std::invalid_argument("start and goal must be finite");
    for (const auto& o : obstacles) {
        if (!o.center.finite() || !(o.radius > 0.0) || !std::isfinite(o.radius))
            throw std::invalid_argument("obstacle radius must be positive and finite");
    }
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
    if (!(reward_eps > 0.0)) throw std::invalid_argument("reward_eps must be > 0");
    if (!(action_bound > 0.0)) throw std::invalid_argument("action_bound must be > 0");
    if (safety_value(start, *this) > 0.0) throw std::invalid_argument("start state lies inside an obstacle");
}

double safety_value(Vec2 s, const EnvSpec& spec) {
    double g = -std::numeric_limits<double>::infinity();
    for (const auto& o : spec.obstacles) g = std::max(g, o.radius - (s - o.center).norm());
    return g;
}

double reward(Vec2 s, const EnvSpec& spec) { return 1.0 / (loss(s, spec) + spec.reward_eps); }

double loss(Vec2 s, const EnvSpec& spec) { return (s - spec.goal).squared_norm(); }

double inflated_radius(double base, int k, double beta, double noise_std, double dt) {
    return base + noise_std * beta * std::sqrt(static_cast<double>(k)) * dt;
}

Vec2 clamp_action(Vec2 a, double bound) {
    return {std::clamp(a.x, -bound, bound), std::clamp(a.y, -bound, bound)};
}

Vec2 sample_disturbance(Stream& stream, double noise_std) {
    const double zx = stream.normal();
    const double zy = stream.normal();
    return {noise_std * zx, noise_std * zy};
}

}  // namespace flipchance
