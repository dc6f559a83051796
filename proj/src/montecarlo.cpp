#include "flipchance/montecarlo.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "flipchance/parallel.hpp"
#include "flipchance/stats.hpp"

namespace flipchance {

std::string RolloutPolicy::label() const {
    if (!flip) return single_id;
    return "flip(" + flip->policy_a + "," + flip->policy_b + ",w=" + format_double(flip->weight) + "," +
           to_string(flip->granularity) + ")";
}

EpisodeRecord rollout(const RolloutPolicy& policy, const PolicyRegistry& registry, const EnvSpec& spec,
                      const PlannerOpts& opts, const Stream& episode_stream) {
    Stream noise = episode_stream.substream(0);
    Stream coin = episode_stream.substream(1);
    const int T = spec.horizon;

    const DeterministicPolicy* current = nullptr;
    bool on_a = false;
    auto choose = [&] {
        const std::string& id = flip_choose(*policy.flip, coin);
        on_a = &id == &policy.flip->policy_a;
        current = &registry.get(id);
    };
    if (policy.flip) {
        policy.flip->validate();
        registry.get(policy.flip->policy_a);
        registry.get(policy.flip->policy_b);
        choose();
    } else {
        current = &registry.get(policy.single_id);
    }

    EpisodeRecord rec;
    rec.states.reserve(T + 1);
    rec.states.push_back(spec.start);
    rec.per_step_unsafe.assign(T, 0);
    Vec2 s = spec.start;
    Vec2 previous{};
    for (int k = 0; k < T; ++k) {
        if (policy.flip && policy.flip->granularity == FlipGranularity::PerStep && k > 0) choose();
        if (on_a) ++rec.chose_a_steps;
        Vec2 a;
        try {
            a = act(*current, s, k, spec, opts);
        } catch (const NoFeasiblePlan& e) {
            // Keep the batch going: repeat the last action (the planner's
            // best effort on the first step).
            ++rec.planner_failures;
            a = k == 0 ? e.best_effort : previous;
        }
        previous = a;
        s = step(s, a, sample_disturbance(noise, spec.noise_std), spec.dt);
        rec.states.push_back(s);
        rec.cum_reward += reward(s, spec);
        if (is_unsafe(s, spec)) {
            rec.per_step_unsafe[k] = 1;
            if (!rec.violated_joint) rec.first_violation_step = k + 1;
            rec.violated_joint = true;
        }
    }
    return rec;
}

std::vector<EpisodeSummary> evaluate_episodes(const RolloutPolicy& policy, const PolicyRegistry& registry,
                                              long long n, const EnvSpec& spec, const PlannerOpts& opts,
                                              double gamma_unsafe, std::uint64_t master_seed, int workers) {
    if (n < 1) throw std::invalid_argument("evaluate: n must be >= 1");
    if (!(gamma_unsafe > 0.0 && gamma_unsafe < 1.0)) throw std::invalid_argument("evaluate: gamma_unsafe must lie in (0, 1)");
    std::vector<EpisodeSummary> out(static_cast<std::size_t>(n));
    parallel_for(out.size(), workers, [&](std::size_t i) {
        const EpisodeRecord rec = rollout(policy, registry, spec, opts, Stream(derive_seed(master_seed, i)));
        EpisodeSummary& e = out[i];
        e.violated = rec.violated_joint;
        e.first_violation_step = rec.first_violation_step.value_or(0);
        e.cum_reward = rec.cum_reward;
        e.unsafe_steps = rec.per_step_unsafe;
        double g = 1.0;
        for (std::uint8_t u : rec.per_step_unsafe) {
            g *= gamma_unsafe;
            if (u) e.discounted_unsafe += g;
        }
        e.planner_failures = rec.planner_failures;
        e.chose_a_steps = rec.chose_a_steps;
    });
    return out;
}

namespace {

double stderr_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

McReport summarize(const std::string& label, const std::vector<EpisodeSummary>& episodes, const EnvSpec& spec,
                   double gamma_unsafe, std::uint64_t master_seed) {
    if (episodes.empty()) throw std::invalid_argument("summarize: no episodes");
    const std::size_t n = episodes.size();
    const double nd = static_cast<double>(n);
    const int T = spec.horizon;
    McReport r;
    r.policy = label;
    r.n_episodes = static_cast<long long>(n);
    r.gamma_unsafe = gamma_unsafe;
    r.seed = master_seed;

    std::vector<double> rewards(n), disc(n);
    std::vector<long long> unsafe_counts(T, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = episodes[i];
        r.violations += e.violated ? 1 : 0;
        r.planner_failures += e.planner_failures;
        rewards[i] = e.cum_reward;
        disc[i] = e.discounted_unsafe;
        if (e.unsafe_steps.size() != static_cast<std::size_t>(T))
            throw std::invalid_argument("summarize: episode length does not match the horizon");
        for (int k = 0; k < T; ++k) unsafe_counts[k] += e.unsafe_steps[k];
    }
    r.violation_prob = static_cast<double>(r.violations) / nd;
    r.violation_ci = binomial_ci(r.violations, r.n_episodes, 0.95);
    r.violation_stderr = n > 1 ? std::sqrt(r.violation_prob * (1.0 - r.violation_prob) / (nd - 1.0)) : 0.0;
    r.mean_reward = pairwise_sum(rewards) / nd;
    r.reward_stderr = stderr_of(rewards, r.mean_reward);
    r.mean_step_reward = r.mean_reward / static_cast<double>(T);
    r.discounted_unsafe = pairwise_sum(disc) / nd;
    r.discounted_unsafe_stderr = stderr_of(disc, r.discounted_unsafe);
    r.marginals.resize(T);
    double g = 1.0;
    for (int k = 0; k < T; ++k) {
        g *= gamma_unsafe;
        r.marginals[k] = static_cast<double>(unsafe_counts[k]) / nd;
        r.marginal_sum += r.marginals[k];
        r.marginal_sum_discounted += g * r.marginals[k];
    }
    return r;
}

McReport evaluate(const RolloutPolicy& policy, const PolicyRegistry& registry, long long n, const EnvSpec& spec,
                  const PlannerOpts& opts, double gamma_unsafe, std::uint64_t master_seed, int workers) {
    const auto episodes = evaluate_episodes(policy, registry, n, spec, opts, gamma_unsafe, master_seed, workers);
    return summarize(policy.label(), episodes, spec, gamma_unsafe, master_seed);
}

PairedDiff paired_difference(const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                             const std::vector<double>& coeffs) {
    if (ys.size() != coeffs.size()) throw std::invalid_argument("paired_difference: coefficient count mismatch");
    std::vector<double> d(x);
    for (std::size_t j = 0; j < ys.size(); ++j) {
        if (ys[j].size() != x.size()) throw std::invalid_argument("paired_difference: length mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) d[i] -= coeffs[j] * ys[j][i];
    }
    PairedDiff out;
    out.mean = pairwise_sum(d) / static_cast<double>(d.size());
    out.stderr_ = stderr_of(d, out.mean);
    return out;
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_report_header(std::ostream& out) {
    out << "policy,n_episodes,violations,violation_prob,ci_lo,ci_hi,violation_stderr,mean_reward,reward_stderr,"
           "mean_step_reward,discounted_unsafe,discounted_unsafe_stderr,marginal_sum,marginal_sum_discounted,"
           "gamma_unsafe,seed,planner_failures\n";
}

void write_report_row(std::ostream& out, const McReport& r) {
    const auto f = format_double;
    out << r.policy << ',' << r.n_episodes << ',' << r.violations << ',' << f(r.violation_prob) << ','
        << f(r.violation_ci.first) << ',' << f(r.violation_ci.second) << ',' << f(r.violation_stderr) << ','
        << f(r.mean_reward) << ',' << f(r.reward_stderr) << ',' << f(r.mean_step_reward) << ','
        << f(r.discounted_unsafe) << ',' << f(r.discounted_unsafe_stderr) << ',' << f(r.marginal_sum) << ','
        << f(r.marginal_sum_discounted) << ',' << f(r.gamma_unsafe) << ',' << r.seed << ',' << r.planner_failures
        << '\n';
}

void write_episode_csv(std::ostream& out, const std::vector<EpisodeSummary>& episodes) {
    out << "episode,violated,first_violation_step,cum_reward,discounted_unsafe,planner_failures,steps_on_a\n";
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& e = episodes[i];
        out << i << ',' << (e.violated ? 1 : 0) << ',' << e.first_violation_step << ',' << format_double(e.cum_reward)
            << ',' << format_double(e.discounted_unsafe) << ',' << e.planner_failures << ',' << e.chose_a_steps << '\n';
    }
}

}  // namespace flipchance
