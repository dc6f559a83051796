#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flipchance/mixture_lp.hpp"
#include "flipchance/montecarlo.hpp"
#include "flipchance/policy.hpp"

namespace flipchance {

struct FrontierPoint {
    double beta = 0.0;
    std::string policy_id;
    double alpha_hat = 0.0;
    std::pair<double, double> alpha_ci{0.0, 1.0};
    double j_hat = 0.0;
    double j_stderr = 0.0;
    McReport report;  // full evaluation; only partly round-tripped through CSV
};

/// How the per-beta deterministic policies are built and evaluated.
struct SweepOpts {
    PolicyKind kind = PolicyKind::NearestNeighbor;
    std::size_t dataset_size = 2000;
    int knn_k = 5;
    double sampler_margin = 2.0;
    int max_attempts = 200;
    int workers = 1;
};

/// 1.00, 1.05, ..., 2.20
std::vector<double> default_beta_grid();

/// Policy for `beta` as the sweep builds it. NearestNeighbor datasets are
/// drawn from a stream shared by all betas, so every beta samples the same
/// candidate states.
DeterministicPolicy build_policy(double beta, const EnvSpec& spec, const PlannerOpts& opts, const SweepOpts& sweep,
                                 std::uint64_t seed);

/// Master seed of the evaluation of `beta`; depends only on (seed, beta).
std::uint64_t beta_eval_seed(std::uint64_t seed, double beta);

struct SweepFailure {
    double beta = 0.0;
    std::string message;
};

struct SweepResult {
    std::vector<FrontierPoint> points;  // input order, failed betas omitted
    std::vector<SweepFailure> failures;
    PolicyRegistry registry;            // every successfully built policy
};

SweepResult sweep_beta(const std::vector<double>& betas, long long n_episodes, const EnvSpec& spec,
                       const PlannerOpts& opts, double gamma_unsafe, std::uint64_t seed, const SweepOpts& sweep = {});

std::vector<RiskReward> risk_reward(const std::vector<FrontierPoint>& points);

/// Mixture LP over frontier points (risk = alpha_hat, value = j_hat).
LpSolution solve_mixture_lp(const std::vector<FrontierPoint>& points, double alpha);

/// Best single point with alpha_hat <= alpha; Infeasible if none.
std::size_t best_deterministic(const std::vector<FrontierPoint>& points, double alpha);

/// Packages an LP solution: policy_a is the lower-alpha member and carries
/// the weight; a singleton becomes weight 1 on both ids.
FlipPolicy build_flip(const std::vector<FrontierPoint>& points, const LpSolution& solution,
                      FlipGranularity granularity = FlipGranularity::PerEpisode);

FlipPolicy build_flip(const std::vector<FrontierPoint>& points, double alpha);

/// Columns: beta,alpha_hat,alpha_lo,alpha_hi,j_hat,j_stderr,policy_id,
/// then discounted_unsafe,marginal_sum,mean_step_reward,n_episodes,planner_failures.
void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& points);

/// Reads the columns above; `#` lines are skipped. Extra report fields are
/// restored where present.
std::vector<FrontierPoint> read_frontier_csv(std::istream& in);

}  // namespace flipchance
