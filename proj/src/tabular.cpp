#include "flipchance/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace flipchance::tabular {

namespace {

PolicyTable policy_from_index(const Ccmdp& mdp, std::uint64_t index) {
    PolicyTable p{mdp.horizon, mdp.n_states, std::vector<int>(static_cast<size_t>(mdp.horizon) * mdp.n_states)};
    for (auto it = p.actions.rbegin(); it != p.actions.rend(); ++it) {
        *it = static_cast<int>(index % mdp.n_actions);
        index /= mdp.n_actions;
    }
    return p;
}

[[noreturn]] void parse_error(const std::string& source, int line, const std::string& what) {
    throw std::invalid_argument(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void Ccmdp::validate() const {
    if (n_states < 1 || n_actions < 1 || horizon < 1) throw std::invalid_argument("ccmdp: empty dimensions");
    if (start < 0 || start >= n_states) throw std::invalid_argument("ccmdp: start state out of range");
    if (transition.size() != static_cast<size_t>(n_states) * n_actions * n_states ||
        reward.size() != static_cast<size_t>(n_states) * n_actions || safe.size() != static_cast<size_t>(n_states))
        throw std::invalid_argument("ccmdp: table sizes do not match dimensions");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int t = 0; t < n_states; ++t) {
                if (!(p(s, a, t) >= 0.0)) throw std::invalid_argument("ccmdp: negative transition probability");
                sum += p(s, a, t);
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("ccmdp: transition row (" + std::to_string(s) + ", " +
                                            std::to_string(a) + ") does not sum to 1");
            if (!std::isfinite(r(s, a))) throw std::invalid_argument("ccmdp: non-finite reward");
        }
    if (!safe[start]) throw std::invalid_argument("ccmdp: start state must be safe");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("ccmdp: alpha must lie in [0, 1]");
}

ExactEval exact_eval(const Ccmdp& mdp, const PolicyTable& policy, double gamma_unsafe) {
    const int n = mdp.n_states;
    std::vector<double> dist(n, 0.0), next(n), safe_mass(n, 0.0), safe_next(n);
    dist[mdp.start] = 1.0;
    safe_mass[mdp.start] = 1.0;
    ExactEval out;
    out.marginals.reserve(mdp.horizon);
    double discount = 1.0;
    for (int k = 0; k < mdp.horizon; ++k) {
        std::fill(next.begin(), next.end(), 0.0);
        std::fill(safe_next.begin(), safe_next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            const int a = policy.at(k, s);
            out.j += dist[s] * mdp.r(s, a);
            for (int t = 0; t < n; ++t) {
                const double p = mdp.p(s, a, t);
                next[t] += dist[s] * p;
                safe_next[t] += safe_mass[s] * p;
            }
        }
        discount *= gamma_unsafe;
        double unsafe = 0.0;
        for (int t = 0; t < n; ++t) {
            if (mdp.safe[t]) continue;
            unsafe += next[t];
            safe_next[t] = 0.0;  // absorbed as violated
        }
        out.marginals.push_back(unsafe);
        out.marginal_sum += unsafe;
        out.h_ecsc += discount * unsafe;
        dist.swap(next);
        safe_mass.swap(safe_next);
    }
    out.f_joint = 0.0;
    for (double m : safe_mass) out.f_joint += m;
    return out;
}

std::uint64_t policy_count(const Ccmdp& mdp) {
    std::uint64_t count = 1;
    const int digits = mdp.n_states * mdp.horizon;
    for (int i = 0; i < digits; ++i) {
        count *= static_cast<std::uint64_t>(mdp.n_actions);
        if (count > kMaxPolicies)
            throw InstanceTooLarge("instance has more than " + std::to_string(kMaxPolicies) + " policies");
    }
    return count;
}

PolicyEnumerator::PolicyEnumerator(const Ccmdp& mdp)
    : current_{mdp.horizon, mdp.n_states, std::vector<int>(static_cast<size_t>(mdp.horizon) * mdp.n_states, 0)},
      n_actions_(mdp.n_actions),
      count_(policy_count(mdp)) {}

bool PolicyEnumerator::next(PolicyTable& out) {
    if (emitted_ == count_) return false;
    if (emitted_ > 0) {
        // increment the base-n_actions counter, last entry fastest
        for (auto it = current_.actions.rbegin(); it != current_.actions.rend(); ++it) {
            if (++*it < n_actions_) break;
            *it = 0;
        }
    }
    ++emitted_;
    out = current_;
    return true;
}

std::vector<PolicyTable> enumerate_policies(const Ccmdp& mdp) {
    PolicyEnumerator e(mdp);
    std::vector<PolicyTable> out;
    out.reserve(e.count());
    PolicyTable p;
    while (e.next(p)) out.push_back(p);
    return out;
}

DeterministicOptimum optimal_deterministic(const Ccmdp& mdp, const Constraint& c) {
    PolicyEnumerator e(mdp);
    DeterministicOptimum best;
    bool found = false;
    PolicyTable p;
    for (std::uint64_t i = 0; e.next(p); ++i) {
        ExactEval ev = exact_eval(mdp, p, c.gamma_unsafe);
        if (c.risk(ev) > c.alpha) continue;
        if (!found || ev.j > best.eval.j) {
            best = {p, std::move(ev), i};
            found = true;
        }
    }
    if (!found) throw NoFeasiblePolicy("no deterministic policy satisfies the constraint");
    return best;
}

std::vector<RiskReward> exact_frontier(const Ccmdp& mdp, const Constraint& c) {
    PolicyEnumerator e(mdp);
    std::vector<RiskReward> out;
    out.reserve(e.count());
    PolicyTable p;
    while (e.next(p)) {
        const ExactEval ev = exact_eval(mdp, p, c.gamma_unsafe);
        out.push_back({c.risk(ev), ev.j});
    }
    return out;
}

MixtureOptimum optimal_mixture(const Ccmdp& mdp, const Constraint& c) {
    // Distinct (risk, reward) pairs, each represented by its first policy.
    std::map<std::pair<double, double>, std::uint64_t> distinct;
    {
        PolicyEnumerator e(mdp);
        PolicyTable p;
        for (std::uint64_t i = 0; e.next(p); ++i) {
            const ExactEval ev = exact_eval(mdp, p, c.gamma_unsafe);
            distinct.emplace(std::make_pair(c.risk(ev), ev.j), i);
        }
    }
    std::vector<RiskReward> points;
    std::vector<std::uint64_t> owner;
    for (const auto& [key, index] : distinct) {
        points.push_back({key.first, key.second});
        owner.push_back(index);
    }
    // Points strictly below the envelope never enter an optimal support.
    const auto hull = concave_envelope(points);
    std::vector<RiskReward> reduced;
    for (const auto& v : hull) reduced.push_back({v.risk, v.value});

    MixtureOptimum out;
    out.lp = solve_mixture_lp(reduced, c.alpha);
    out.value = out.lp.value;
    for (auto& s : out.lp.support) {
        const auto policy = policy_from_index(mdp, owner[hull[s.index].index]);
        out.evals.push_back(exact_eval(mdp, policy, c.gamma_unsafe));
        out.policies.push_back(policy);
        s.index = out.policies.size() - 1;
    }
    return out;
}

ConservativeReport conservative_check(const Ccmdp& mdp, const PolicyTable& policy, double gamma_unsafe,
                                      double alpha) {
    const ExactEval ev = exact_eval(mdp, policy, gamma_unsafe);
    ConservativeReport r;
    r.h_ecsc = ev.h_ecsc;
    r.marginal_sum = ev.marginal_sum;
    r.violation = 1.0 - ev.f_joint;
    r.ecsc_satisfied = r.h_ecsc <= alpha;
    r.joint_satisfied = r.violation <= alpha;
    return r;
}

double value_iteration_optimum(const Ccmdp& mdp) {
    std::vector<double> v(mdp.n_states, 0.0), prev(mdp.n_states);
    for (int k = mdp.horizon - 1; k >= 0; --k) {
        prev = v;
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a) {
                double q = mdp.r(s, a);
                for (int t = 0; t < mdp.n_states; ++t) q += mdp.p(s, a, t) * prev[t];
                best = std::max(best, q);
            }
            v[s] = best;
        }
    }
    return v[mdp.start];
}

Ccmdp parse_instance(std::istream& in, const std::string& source) {
    Ccmdp m;
    std::vector<bool> seen;
    bool have_safe = false;
    std::string raw;
    int line_no = 0;
    auto need_dims = [&](int line) {
        if (m.n_states < 1 || m.n_actions < 1) parse_error(source, line, "'states' and 'actions' must come first");
        if (seen.empty()) {
            seen.assign(static_cast<size_t>(m.n_states) * m.n_actions, false);
            m.transition.assign(static_cast<size_t>(m.n_states) * m.n_actions * m.n_states, 0.0);
            m.reward.assign(static_cast<size_t>(m.n_states) * m.n_actions, 0.0);
        }
    };
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string text = raw.substr(0, hash);
        std::istringstream ls(text);
        std::string head;
        if (!(ls >> head)) continue;
        auto read_int = [&](int& dst) {
            if (!(ls >> dst)) parse_error(source, line_no, "expected an integer after '" + head + "'");
        };
        if (head == "states") {
            read_int(m.n_states);
        } else if (head == "actions") {
            read_int(m.n_actions);
        } else if (head == "horizon") {
            read_int(m.horizon);
        } else if (head == "start") {
            read_int(m.start);
        } else if (head == "alpha") {
            if (!(ls >> m.alpha)) parse_error(source, line_no, "expected a number after 'alpha'");
        } else if (head == "safe") {
            need_dims(line_no);
            m.safe.assign(m.n_states, false);
            for (int s = 0; s < m.n_states; ++s) {
                int b = 0;
                if (!(ls >> b) || (b != 0 && b != 1)) parse_error(source, line_no, "safe mask needs N values of 0/1");
                m.safe[s] = b == 1;
            }
            have_safe = true;
        } else {
            need_dims(line_no);
            int s = 0, a = 0;
            std::string bar;
            std::istringstream row(text);
            if (!(row >> s >> a >> bar) || bar != "|") parse_error(source, line_no, "expected 's a | probs | reward'");
            if (s < 0 || s >= m.n_states || a < 0 || a >= m.n_actions)
                parse_error(source, line_no, "state or action index out of range");
            for (int t = 0; t < m.n_states; ++t)
                if (!(row >> m.transition[(static_cast<size_t>(s) * m.n_actions + a) * m.n_states + t]))
                    parse_error(source, line_no, "expected " + std::to_string(m.n_states) + " probabilities");
            if (!(row >> bar) || bar != "|" || !(row >> m.reward[static_cast<size_t>(s) * m.n_actions + a]))
                parse_error(source, line_no, "expected '| reward' after the probabilities");
            seen[static_cast<size_t>(s) * m.n_actions + a] = true;
        }
    }
    if (!have_safe) parse_error(source, line_no, "missing 'safe' line");
    for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            parse_error(source, line_no,
                        "missing row for state " + std::to_string(i / m.n_actions) + " action " +
                            std::to_string(i % m.n_actions));
    m.validate();
    return m;
}

Ccmdp load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open instance file '" + path + "'");
    return parse_instance(in, path);
}

void write_instance(std::ostream& out, const Ccmdp& m) {
    out << std::setprecision(17);
    out << "states " << m.n_states << "\nactions " << m.n_actions << "\nhorizon " << m.horizon << "\nstart "
        << m.start << "\nalpha " << m.alpha << "\nsafe";
    for (bool b : m.safe) out << ' ' << (b ? 1 : 0);
    out << '\n';
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            out << s << ' ' << a << " |";
            for (int t = 0; t < m.n_states; ++t) out << ' ' << m.p(s, a, t);
            out << " | " << m.r(s, a) << '\n';
        }
}

}  // namespace flipchance::tabular
