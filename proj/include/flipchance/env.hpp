#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "flipchance/rng.hpp"

namespace flipchance {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;

    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    constexpr double squared_norm() const { return x * x + y * y; }
    double norm() const { return std::hypot(x, y); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

struct Disk {
    Vec2 center;
    double radius = 1.0;
};

/// Stochastic single-integrator navigation world.
struct EnvSpec {
    Vec2 start{0.0, 0.0};
    Vec2 goal{15.0, 15.0};
    std::vector<Disk> obstacles{{{7.5, 10.0}, 2.5}, {{10.0, 5.0}, 2.5}};
    double noise_std = 0.6;
    double dt = 1.0;
    int horizon = 20;
    double action_bound = 1.5;  // infinity-norm cap; may be +inf
    double reward_eps = 0.1;

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;
};

/// s + dt * (a + d)
constexpr Vec2 step(Vec2 s, Vec2 a, Vec2 d, double dt) {
    return {s.x + dt * (a.x + d.x), s.y + dt * (a.y + d.y)};
}

/// Largest penetration depth over the obstacles; the state is safe iff <= 0.
double safety_value(Vec2 s, const EnvSpec& spec);

inline bool is_unsafe(Vec2 s, const EnvSpec& spec) { return safety_value(s, spec) > 0.0; }

/// 1 / (|s - goal|^2 + reward_eps)
double reward(Vec2 s, const EnvSpec& spec);

/// |s - goal|^2
double loss(Vec2 s, const EnvSpec& spec);

/// Obstacle radius grown by beta standard deviations of the noise
/// accumulated over k steps: base + noise_std * beta * sqrt(k) * dt.
double inflated_radius(double base, int k, double beta, double noise_std, double dt);

/// Componentwise clamp to the infinity-norm action bound.
Vec2 clamp_action(Vec2 a, double bound);

/// Two independent N(0, noise_std^2) coordinates. Always consumes two
/// normals so the stream advances identically for every noise level.
Vec2 sample_disturbance(Stream& stream, double noise_std);

}  // namespace flipchance
