#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>

#include "flipchance/bounds.hpp"
#include "flipchance/env.hpp"
#include "flipchance/frontier.hpp"
#include "flipchance/mixture_lp.hpp"
#include "flipchance/montecarlo.hpp"
#include "flipchance/planner.hpp"
#include "flipchance/stats.hpp"
#include "flipchance/tabular.hpp"

namespace py = pybind11;
using namespace flipchance;

namespace {

using Pair = std::pair<double, double>;

Vec2 vec(const Pair& p) { return {p.first, p.second}; }
Pair tup(Vec2 v) { return {v.x, v.y}; }

std::vector<RiskReward> points_from(const std::vector<Pair>& pts) {
    std::vector<RiskReward> out;
    out.reserve(pts.size());
    for (const auto& [r, v] : pts) out.push_back({r, v});
    return out;
}

py::dict lp_dict(const LpSolution& s) {
    py::list support;
    for (const auto& e : s.support) support.append(py::make_tuple(e.index, e.weight));
    py::dict d;
    d["value"] = s.value;
    d["risk"] = s.risk;
    d["active"] = s.active_constraint;
    d["support"] = support;
    return d;
}

py::dict report_dict(const McReport& r) {
    py::dict d;
    d["policy"] = r.policy;
    d["n_episodes"] = r.n_episodes;
    d["violation_prob"] = r.violation_prob;
    d["violation_ci"] = r.violation_ci;
    d["mean_reward"] = r.mean_reward;
    d["reward_stderr"] = r.reward_stderr;
    d["discounted_unsafe"] = r.discounted_unsafe;
    d["marginals"] = r.marginals;
    d["marginal_sum"] = r.marginal_sum;
    d["planner_failures"] = r.planner_failures;
    return d;
}

/// Owns the registry so flips can be evaluated after the sweep returns.
struct Sweep {
    SweepResult result;
    EnvSpec env;
    PlannerOpts planner;
    double gamma_unsafe = 0.995;
};

}  // namespace

PYBIND11_MODULE(_flipchance, m) {
    m.doc() = "Randomized two-policy mixtures for chance-constrained navigation";

    py::register_exception<NoFeasiblePlan>(m, "NoFeasiblePlan", PyExc_RuntimeError);
    py::register_exception<Infeasible>(m, "Infeasible", PyExc_RuntimeError);
    py::register_exception<tabular::InstanceTooLarge>(m, "InstanceTooLarge", PyExc_RuntimeError);

    py::class_<EnvSpec>(m, "EnvSpec")
        .def(py::init<>())
        .def_property(
            "start", [](const EnvSpec& e) { return tup(e.start); }, [](EnvSpec& e, Pair p) { e.start = vec(p); })
        .def_property(
            "goal", [](const EnvSpec& e) { return tup(e.goal); }, [](EnvSpec& e, Pair p) { e.goal = vec(p); })
        .def_property(
            "obstacles",
            [](const EnvSpec& e) {
                std::vector<std::pair<Pair, double>> out;
                for (const auto& o : e.obstacles) out.push_back({tup(o.center), o.radius});
                return out;
            },
            [](EnvSpec& e, const std::vector<std::pair<Pair, double>>& obs) {
                e.obstacles.clear();
                for (const auto& [c, r] : obs) e.obstacles.push_back({vec(c), r});
            })
        .def_readwrite("noise_std", &EnvSpec::noise_std)
        .def_readwrite("dt", &EnvSpec::dt)
        .def_readwrite("horizon", &EnvSpec::horizon)
        .def_readwrite("action_bound", &EnvSpec::action_bound)
        .def_readwrite("reward_eps", &EnvSpec::reward_eps)
        .def("validate", &EnvSpec::validate);

    py::class_<PlannerOpts>(m, "PlannerOpts")
        .def(py::init<>())
        .def_readwrite("penalty_init", &PlannerOpts::penalty_init)
        .def_readwrite("penalty_growth", &PlannerOpts::penalty_growth)
        .def_readwrite("penalty_rounds", &PlannerOpts::penalty_rounds)
        .def_readwrite("inner_steps", &PlannerOpts::inner_steps)
        .def_readwrite("damping", &PlannerOpts::damping)
        .def_readwrite("feas_tol", &PlannerOpts::feas_tol)
        .def_readwrite("restarts", &PlannerOpts::restarts);

    m.def("step", [](Pair s, Pair a, Pair d, double dt) { return tup(step(vec(s), vec(a), vec(d), dt)); },
          py::arg("s"), py::arg("a"), py::arg("d"), py::arg("dt"));
    m.def("safety_value", [](Pair s, const EnvSpec& e) { return safety_value(vec(s), e); });
    m.def("reward", [](Pair s, const EnvSpec& e) { return reward(vec(s), e); });
    m.def("inflated_radius", &inflated_radius, py::arg("base"), py::arg("k"), py::arg("beta"), py::arg("noise_std"),
          py::arg("dt"));

    m.def(
        "plan",
        [](Pair start, double beta, const EnvSpec& e, const PlannerOpts& o) {
            const PlanResult r = plan(vec(start), beta, e, o);
            std::vector<Pair> actions, states;
            for (auto a : r.actions) actions.push_back(tup(a));
            for (auto s : r.states) states.push_back(tup(s));
            py::dict d;
            d["actions"] = actions;
            d["states"] = states;
            d["objective"] = r.objective;
            d["max_violation"] = r.max_violation;
            return d;
        },
        py::arg("start"), py::arg("beta"), py::arg("env") = EnvSpec{}, py::arg("opts") = PlannerOpts{});

    m.def(
        "solve_mixture_lp",
        [](const std::vector<Pair>& pts, double limit) { return lp_dict(solve_mixture_lp(points_from(pts), limit)); },
        py::arg("points"), py::arg("limit"), "points are (risk, value) pairs");
    m.def(
        "envelope_value",
        [](const std::vector<Pair>& pts, double alpha) {
            const auto rr = points_from(pts);
            return envelope_value(concave_envelope(rr), alpha);
        },
        py::arg("points"), py::arg("alpha"));

    m.def("binomial_ci", &binomial_ci, py::arg("successes"), py::arg("n"), py::arg("level") = 0.95);
    m.def(
        "hoeffding_failure_bound",
        [](std::int64_t n, double alpha_s, double alpha_tilde_s, double gamma) {
            return hoeffding_failure_bound({n, alpha_s, alpha_tilde_s, gamma}).value;
        },
        py::arg("n"), py::arg("alpha_s"), py::arg("alpha_tilde_s"), py::arg("gamma_unsafe"));
    m.def("required_samples", &required_samples, py::arg("delta"), py::arg("gap"), py::arg("gamma_unsafe"));

    m.def(
        "tabular_optimum",
        [](const std::string& path, std::optional<double> alpha, const std::string& constraint, double gamma) {
            const auto inst = tabular::load_instance(path);
            tabular::Constraint c;
            if (constraint == "joint") c.kind = tabular::ConstraintKind::Joint;
            else if (constraint == "ecsc") c.kind = tabular::ConstraintKind::Ecsc;
            else throw std::invalid_argument("constraint must be 'joint' or 'ecsc'");
            c.alpha = alpha.value_or(inst.alpha);
            c.gamma_unsafe = gamma;
            py::dict d;
            d["deterministic"] = tabular::optimal_deterministic(inst, c).eval.j;
            d["mixture"] = tabular::optimal_mixture(inst, c).value;
            return d;
        },
        py::arg("path"), py::arg("alpha") = py::none(), py::arg("constraint") = "joint", py::arg("gamma") = 0.995);

    py::class_<Sweep>(m, "Sweep")
        .def_property_readonly("frontier",
                               [](const Sweep& s) {
                                   py::list out;
                                   for (const auto& p : s.result.points) {
                                       py::dict d = report_dict(p.report);
                                       d["beta"] = p.beta;
                                       d["policy_id"] = p.policy_id;
                                       out.append(d);
                                   }
                                   return out;
                               })
        .def_property_readonly("failures",
                               [](const Sweep& s) {
                                   std::vector<std::pair<double, std::string>> out;
                                   for (const auto& f : s.result.failures) out.push_back({f.beta, f.message});
                                   return out;
                               })
        .def("lp", [](const Sweep& s, double alpha) { return lp_dict(solve_mixture_lp(s.result.points, alpha)); })
        .def(
            "evaluate_flip",
            [](const Sweep& s, const std::string& a, const std::string& b, double weight, long long n,
               std::uint64_t seed, const std::string& granularity) {
                FlipPolicy f{a, b, weight, parse_granularity(granularity)};
                py::gil_scoped_release release;
                return evaluate(RolloutPolicy::flipped(f), s.result.registry, n, s.env, s.planner, s.gamma_unsafe,
                                seed);
            },
            py::arg("policy_a"), py::arg("policy_b"), py::arg("weight"), py::arg("n_episodes") = 10000,
            py::arg("seed") = 42, py::arg("granularity") = "per_episode");

    py::class_<McReport>(m, "McReport")
        .def_readonly("policy", &McReport::policy)
        .def_readonly("n_episodes", &McReport::n_episodes)
        .def_readonly("violation_prob", &McReport::violation_prob)
        .def_readonly("violation_ci", &McReport::violation_ci)
        .def_readonly("mean_reward", &McReport::mean_reward)
        .def_readonly("reward_stderr", &McReport::reward_stderr)
        .def_readonly("discounted_unsafe", &McReport::discounted_unsafe)
        .def_readonly("marginal_sum", &McReport::marginal_sum);

    m.def(
        "sweep",
        [](const std::vector<double>& betas, long long n_episodes, std::uint64_t seed, std::size_t dataset_size,
           int knn_k, const std::string& policy, const EnvSpec& env, int workers) {
            SweepOpts so;
            so.kind = parse_policy_kind(policy);
            so.dataset_size = dataset_size;
            so.knn_k = knn_k;
            so.workers = workers;
            Sweep s;
            s.env = env;
            {
                py::gil_scoped_release release;
                s.result = sweep_beta(betas, n_episodes, env, s.planner, s.gamma_unsafe, seed, so);
            }
            return s;
        },
        py::arg("betas") = default_beta_grid(), py::arg("n_episodes") = 1000, py::arg("seed") = 42,
        py::arg("dataset_size") = 2000, py::arg("knn_k") = 5, py::arg("policy") = "nearest_neighbor",
        py::arg("env") = EnvSpec{}, py::arg("workers") = 1);
}
