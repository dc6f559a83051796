#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flipchance/env.hpp"
#include "flipchance/planner.hpp"
#include "flipchance/policy.hpp"
#include "flipchance/rng.hpp"

namespace flipchance {

/// What drives an episode: one registered policy, or a flip of two.
struct RolloutPolicy {
    std::string single_id;
    std::optional<FlipPolicy> flip;

    static RolloutPolicy single(std::string id) { return {std::move(id), std::nullopt}; }
    static RolloutPolicy flipped(FlipPolicy f) { return {{}, std::move(f)}; }

    std::string label() const;
};

struct EpisodeRecord {
    std::vector<Vec2> states;              // s_0 .. s_T
    bool violated_joint = false;           // some s_1..s_T unsafe
    std::optional<int> first_violation_step;
    double cum_reward = 0.0;               // sum_{k=1..T} r(s_k)
    std::vector<std::uint8_t> per_step_unsafe;  // entry k-1 is s_k
    int planner_failures = 0;
    int chose_a_steps = 0;                 // steps driven by flip.policy_a
};

/// One episode. The disturbances come from substream 0 of `episode_stream`
/// and flip draws from substream 1, so a flip episode and a component
/// episode on the same stream see identical noise.
EpisodeRecord rollout(const RolloutPolicy& policy, const PolicyRegistry& registry, const EnvSpec& spec,
                      const PlannerOpts& opts, const Stream& episode_stream);

/// Per-episode numbers kept by `evaluate`.
struct EpisodeSummary {
    bool violated = false;
    int first_violation_step = 0;  // 0 when safe
    double cum_reward = 0.0;
    double discounted_unsafe = 0.0;  // sum_{k=1..T} gamma^k 1(s_k unsafe)
    std::vector<std::uint8_t> unsafe_steps;  // entry k-1 is s_k
    int planner_failures = 0;
    int chose_a_steps = 0;
};

struct McReport {
    std::string policy;
    long long n_episodes = 0;
    long long violations = 0;
    double violation_prob = 0.0;
    std::pair<double, double> violation_ci{0.0, 1.0};  // Clopper-Pearson 95%
    double violation_stderr = 0.0;
    double mean_reward = 0.0;       // cumulative over the episode
    double reward_stderr = 0.0;
    double mean_step_reward = 0.0;  // mean_reward / T
    double discounted_unsafe = 0.0;
    double discounted_unsafe_stderr = 0.0;
    std::vector<double> marginals;  // P(s_k unsafe), k = 1..T
    double marginal_sum = 0.0;
    double marginal_sum_discounted = 0.0;  // sum_k gamma^k P(s_k unsafe)
    double gamma_unsafe = 0.995;
    std::uint64_t seed = 0;
    long long planner_failures = 0;
};

/// Runs episodes 0..n-1, episode i on Stream(derive_seed(master_seed, i)).
std::vector<EpisodeSummary> evaluate_episodes(const RolloutPolicy& policy, const PolicyRegistry& registry,
                                              long long n, const EnvSpec& spec, const PlannerOpts& opts,
                                              double gamma_unsafe, std::uint64_t master_seed, int workers = 1);

/// Aggregates summaries in index order; bitwise independent of how they
/// were produced.
McReport summarize(const std::string& label, const std::vector<EpisodeSummary>& episodes, const EnvSpec& spec,
                   double gamma_unsafe, std::uint64_t master_seed);

McReport evaluate(const RolloutPolicy& policy, const PolicyRegistry& registry, long long n, const EnvSpec& spec,
                  const PlannerOpts& opts, double gamma_unsafe, std::uint64_t master_seed, int workers = 1);

/// Mean and standard error of x_i - sum_j c_j y_ji over paired episodes.
struct PairedDiff {
    double mean = 0.0;
    double stderr_ = 0.0;
};
PairedDiff paired_difference(const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                             const std::vector<double>& coeffs);

/// Shortest decimal that reads back to the same double; used in every CSV.
std::string format_double(double v);

void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const McReport& r);
void write_episode_csv(std::ostream& out, const std::vector<EpisodeSummary>& episodes);

}  // namespace flipchance
