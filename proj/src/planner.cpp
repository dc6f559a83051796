#include "flipchance/planner.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Dense>

namespace flipchance {

namespace {

struct Candidate {
    std::vector<Vec2> actions;
    double objective = 0.0;
    double violation = 0.0;
};

// Feasible beats infeasible; among feasible the lower objective wins; among
// infeasible the smaller violation wins.
bool better(double obj, double viol, const Candidate& incumbent, double tol) {
    const bool feas = viol <= tol;
    const bool inc_feas = incumbent.violation <= tol;
    if (feas != inc_feas) return feas;
    if (feas) return obj < incumbent.objective;
    return viol < incumbent.violation || (viol == incumbent.violation && obj < incumbent.objective);
}

// Quadratic-penalty merit  sum_k |s_k - g|^2 + rho * sum_{k,i} max(0, R_ki + margin - d_ki)^2
// over the action sequence, with its Gauss-Newton model.
class PenaltyProblem {
public:
    PenaltyProblem(Vec2 start, double beta, const EnvSpec& spec, int horizon, double margin)
        : start_(start), spec_(spec), horizon_(horizon), n_obs_(spec.obstacles.size()), margin_(margin) {
        radii_.resize(static_cast<size_t>(horizon) * n_obs_);
        for (int k = 1; k <= horizon; ++k)
            for (size_t i = 0; i < n_obs_; ++i)
                radii_[(k - 1) * n_obs_ + i] =
                    inflated_radius(spec.obstacles[i].radius, k, beta, spec.noise_std, spec.dt);
        states_.resize(horizon + 1);
        q_.resize(horizon + 1);
        w_.resize(horizon + 2);
    }

    struct Value {
        double merit = 0.0;
        double objective = 0.0;
        double violation = 0.0;  // true worst penetration, no margin
        bool penalized = false;  // some penalty term is active
    };

    Value value(const Eigen::VectorXd& a, double rho) {
        Value out;
        Vec2 s = start_;
        for (int k = 1; k <= horizon_; ++k) {
            s = step(s, {a[2 * (k - 1)], a[2 * (k - 1) + 1]}, {}, spec_.dt);
            out.objective += loss(s, spec_);
            double pen_sum = 0.0;
            for (size_t i = 0; i < n_obs_; ++i) {
                const double d = (s - spec_.obstacles[i].center).norm();
                const double r = radii_[(k - 1) * n_obs_ + i];
                out.violation = std::max(out.violation, r - d);
                const double pen = r + margin_ - d;
                if (pen > 0.0) {
                    pen_sum += pen * pen;
                    out.penalized = true;
                }
            }
            out.merit += rho * pen_sum;
        }
        out.merit += out.objective;
        return out;
    }

    // Fills grad = J^T r and hess = J^T J for the residual vector r whose
    // squared norm is the merit.
    void linearize(const Eigen::VectorXd& a, double rho, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
        const double dt = spec_.dt;
        states_[0] = start_;
        for (int k = 1; k <= horizon_; ++k) {
            const Vec2 s = step(states_[k - 1], {a[2 * (k - 1)], a[2 * (k - 1) + 1]}, {}, dt);
            states_[k] = s;
            Vec2 q = s - spec_.goal;
            Sym2 w{1.0, 0.0, 1.0};
            for (size_t i = 0; i < n_obs_; ++i) {
                const Vec2 rel = s - spec_.obstacles[i].center;
                const double d = rel.norm();
                const double pen = radii_[(k - 1) * n_obs_ + i] + margin_ - d;
                if (pen <= 0.0) continue;
                const Vec2 u = d > 0.0 ? (1.0 / d) * rel : Vec2{1.0, 0.0};
                q = q - (rho * pen) * u;
                w.xx += rho * u.x * u.x;
                w.xy += rho * u.x * u.y;
                w.yy += rho * u.y * u.y;
            }
            q_[k] = q;
            w_[k] = w;
        }
        // Suffix sums: action j influences states j+1..H.
        w_[horizon_ + 1] = {0.0, 0.0, 0.0};
        for (int k = horizon_; k >= 1; --k) {
            w_[k].xx += w_[k + 1].xx;
            w_[k].xy += w_[k + 1].xy;
            w_[k].yy += w_[k + 1].yy;
        }
        Vec2 suffix{};
        for (int j = horizon_ - 1; j >= 0; --j) {
            suffix = suffix + q_[j + 1];
            grad[2 * j] = dt * suffix.x;
            grad[2 * j + 1] = dt * suffix.y;
        }
        const double dt2 = dt * dt;
        for (int j = 0; j < horizon_; ++j)
            for (int l = 0; l < horizon_; ++l) {
                const Sym2& blk = w_[std::max(j, l) + 1];
                hess(2 * j, 2 * l) = dt2 * blk.xx;
                hess(2 * j, 2 * l + 1) = dt2 * blk.xy;
                hess(2 * j + 1, 2 * l) = dt2 * blk.xy;
                hess(2 * j + 1, 2 * l + 1) = dt2 * blk.yy;
            }
    }

private:
    struct Sym2 {
        double xx, xy, yy;
    };

    Vec2 start_;
    const EnvSpec& spec_;
    int horizon_;
    size_t n_obs_;
    double margin_;
    std::vector<double> radii_;
    std::vector<Vec2> states_;
    std::vector<Vec2> q_;
    std::vector<Sym2> w_;
};

Eigen::VectorXd clamp_vector(Eigen::VectorXd x, double bound) {
    if (std::isfinite(bound)) x = x.cwiseMax(-bound).cwiseMin(bound);
    return x;
}

// Greedy toward `waypoint` until it is reached, then toward the goal.
std::vector<Vec2> detour_seed(Vec2 start, Vec2 waypoint, const EnvSpec& spec, int horizon) {
    std::vector<Vec2> actions;
    actions.reserve(horizon);
    Vec2 s = start;
    bool reached = false;
    const double reach = std::isfinite(spec.action_bound) ? spec.action_bound * spec.dt : 0.0;
    for (int k = 0; k < horizon; ++k) {
        if (!reached && (waypoint - s).norm() <= std::max(reach, 1e-9)) reached = true;
        const Vec2 target = reached ? spec.goal : waypoint;
        const Vec2 a = clamp_action((1.0 / spec.dt) * (target - s), spec.action_bound);
        actions.push_back(a);
        s = step(s, a, {}, spec.dt);
    }
    return actions;
}

std::vector<std::vector<Vec2>> seeds(Vec2 start, double beta, const EnvSpec& spec, const PlannerOpts& opts,
                                     int horizon) {
    std::vector<std::vector<Vec2>> out;
    out.push_back(greedy_actions(start, spec.goal, spec.action_bound, spec.dt, horizon));
    if (spec.obstacles.empty() || opts.restarts < 2) return out;

    Vec2 mid{};
    for (const auto& o : spec.obstacles) mid = mid + o.center;
    mid = (1.0 / static_cast<double>(spec.obstacles.size())) * mid;
    const int k_mid = std::max(1, horizon / 2);
    double reach = 0.0;
    for (const auto& o : spec.obstacles)
        reach = std::max(reach, (o.center - mid).norm() +
                                    inflated_radius(o.radius, k_mid, beta, spec.noise_std, spec.dt));
    Vec2 axis = spec.goal - start;
    const double len = axis.norm();
    axis = len > 0.0 ? (1.0 / len) * axis : Vec2{1.0, 0.0};
    const Vec2 normal{-axis.y, axis.x};
    // counterclockwise (left of the start-goal axis) then clockwise
    const std::array<double, 2> sides{1.0, -1.0};
    for (int r = 1; r < opts.restarts; ++r) {
        const double side = sides[(r - 1) % 2];
        const double scale = 1.0 + 0.5 * static_cast<double>((r - 1) / 2);
        out.push_back(detour_seed(start, mid + (side * reach * scale) * normal, spec, horizon));
    }
    return out;
}

}  // namespace

void PlannerOpts::validate() const {
    if (!(penalty_init > 0.0) || !(penalty_growth > 1.0) || penalty_rounds < 1 || inner_steps < 1 ||
        !(damping > 0.0) || !(feas_tol > 0.0) || restarts < 1)
        throw std::invalid_argument("planner options must be positive with penalty_growth > 1");
}

NoFeasiblePlan::NoFeasiblePlan(Vec2 best, double viol)
    : std::runtime_error("no feasible plan (violation " + std::to_string(viol) + " m)"),
      best_effort(best),
      violation(viol) {}

std::vector<Vec2> rollout_nominal(Vec2 start, const std::vector<Vec2>& actions, double dt) {
    std::vector<Vec2> states;
    states.reserve(actions.size() + 1);
    states.push_back(start);
    for (const auto& a : actions) states.push_back(step(states.back(), a, {}, dt));
    return states;
}

double inflated_violation(const std::vector<Vec2>& states, double beta, const EnvSpec& spec) {
    double worst = 0.0;
    for (size_t k = 1; k < states.size(); ++k)
        for (const auto& o : spec.obstacles) {
            const double r = inflated_radius(o.radius, static_cast<int>(k), beta, spec.noise_std, spec.dt);
            worst = std::max(worst, r - (states[k] - o.center).norm());
        }
    return worst;
}

std::vector<Vec2> greedy_actions(Vec2 start, Vec2 target, double bound, double dt, int horizon) {
    std::vector<Vec2> actions;
    actions.reserve(horizon);
    Vec2 s = start;
    for (int k = 0; k < horizon; ++k) {
        const Vec2 a = clamp_action((1.0 / dt) * (target - s), bound);
        actions.push_back(a);
        s = step(s, a, {}, dt);
    }
    return actions;
}

PlanResult plan(Vec2 start, double beta, const EnvSpec& spec, const PlannerOpts& opts, int horizon) {
    if (!start.finite()) throw std::invalid_argument("plan: start state must be finite");
    if (horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");
    opts.validate();

    // Aim slightly outside the inflated disks so the quadratic penalty's
    // residual penetration stays within the feasibility tolerance.
    PenaltyProblem problem(start, beta, spec, horizon, 0.5 * opts.feas_tol);
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(horizon);
    const double bound = spec.action_bound;
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd hess(n, n);

    auto to_vector = [&](const std::vector<Vec2>& actions) {
        Eigen::VectorXd a(n);
        for (int j = 0; j < horizon; ++j) {
            a[2 * j] = actions[j].x;
            a[2 * j + 1] = actions[j].y;
        }
        return a;
    };
    auto finish = [&](Candidate chosen) {
        PlanResult result;
        result.actions = std::move(chosen.actions);
        result.states = rollout_nominal(start, result.actions, spec.dt);
        result.objective = chosen.objective;
        result.max_violation = std::max(0.0, chosen.violation);
        result.converged = result.max_violation <= opts.feas_tol;
        return result;
    };

    const auto all_seeds = seeds(start, beta, spec, opts, horizon);
    // The greedy seed minimizes the obstacle-free problem exactly; when it
    // clears every inflated disk it is the constrained optimum as well.
    if (const auto v = problem.value(to_vector(all_seeds.front()), 1.0); !v.penalized)
        return finish({all_seeds.front(), v.objective, v.violation});

    Candidate best;
    bool have_best = false;
    for (const auto& seed : all_seeds) {
        Eigen::VectorXd a = to_vector(seed);
        double rho = opts.penalty_init;
        double lambda = opts.damping;
        for (int round = 0; round < opts.penalty_rounds; ++round, rho *= opts.penalty_growth) {
            auto current = problem.value(a, rho);
            for (int it = 0; it < opts.inner_steps; ++it) {
                problem.linearize(a, rho, grad, hess);
                // Coordinates pinned at the clamp with the descent direction
                // pointing outward are held fixed for this step.
                std::vector<Eigen::Index> free;
                free.reserve(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const bool pinned = std::isfinite(bound) && ((a[i] >= bound && grad[i] < 0.0) ||
                                                                 (a[i] <= -bound && grad[i] > 0.0));
                    if (!pinned) free.push_back(i);
                }
                if (free.empty()) break;
                const auto nf = static_cast<Eigen::Index>(free.size());
                Eigen::MatrixXd h(nf, nf);
                Eigen::VectorXd g(nf);
                for (Eigen::Index r = 0; r < nf; ++r) {
                    g[r] = grad[free[r]];
                    for (Eigen::Index c = 0; c < nf; ++c) h(r, c) = hess(free[r], free[c]);
                }
                if (g.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + current.merit)) break;
                bool accepted = false;
                for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
                    Eigen::MatrixXd damped = h;
                    damped.diagonal() += lambda * (h.diagonal().array() + 1e-9).matrix();
                    const Eigen::VectorXd delta = damped.ldlt().solve(-g);
                    Eigen::VectorXd trial = a;
                    for (Eigen::Index r = 0; r < nf; ++r) trial[free[r]] += delta[r];
                    trial = clamp_vector(std::move(trial), bound);
                    const auto next = problem.value(trial, rho);
                    if (next.merit < current.merit) {
                        const double gain = current.merit - next.merit;
                        const double moved = (trial - a).lpNorm<Eigen::Infinity>();
                        a = std::move(trial);
                        current = next;
                        lambda = std::max(lambda / 3.0, 1e-12);
                        accepted = true;
                        if (gain <= 1e-9 * (1.0 + current.merit) || moved <= 1e-7) it = opts.inner_steps;
                    } else {
                        lambda *= 4.0;
                    }
                }
                if (!accepted) break;
            }
            // With no penalty term active a larger weight leaves the merit unchanged.
            if (!current.penalized) break;
        }
        const auto final_value = problem.value(a, 0.0);
        Candidate local;
        local.actions.resize(horizon);
        for (int j = 0; j < horizon; ++j) local.actions[j] = {a[2 * j], a[2 * j + 1]};
        local.objective = final_value.objective;
        local.violation = final_value.violation;
        if (!have_best || better(local.objective, local.violation, best, opts.feas_tol)) {
            best = std::move(local);
            have_best = true;
        }
    }

    return finish(std::move(best));
}

Vec2 first_action(Vec2 s, double beta, const EnvSpec& spec, const PlannerOpts& opts, int horizon) {
    const PlanResult p = plan(s, beta, spec, opts, horizon);
    if (!p.converged) throw NoFeasiblePlan(p.actions.front(), p.max_violation);
    return p.actions.front();
}

void write_plan_csv(std::ostream& out, const PlanResult& plan) {
    auto num = [](double v) {
        std::array<char, 32> buf{};
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        return std::string(buf.data(), res.ptr);
    };
    out << "k,x,y,u,v\n";
    for (std::size_t k = 0; k < plan.states.size(); ++k) {
        out << k << ',' << num(plan.states[k].x) << ',' << num(plan.states[k].y) << ',';
        if (k < plan.actions.size()) out << num(plan.actions[k].x) << ',' << num(plan.actions[k].y);
        else out << ',';
        out << '\n';
    }
}

}  // namespace flipchance
