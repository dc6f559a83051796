#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flipchance/env.hpp"
#include "flipchance/frontier.hpp"
#include "flipchance/planner.hpp"
#include "flipchance/policy.hpp"

namespace flipchance {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    EnvSpec env;
    PlannerOpts planner;

    std::vector<double> betas = default_beta_grid();
    long long n_episodes = 1000;
    double gamma_unsafe = 0.995;
    SweepOpts sweep;  // workers is taken from the command line, not the file

    std::vector<double> lp_alphas;  // empty: 0.01 grid over the frontier's alpha range
    int lp_uniform_samples = 0;     // > 0: that many uniform alpha draws instead of the grid

    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;

    std::optional<FlipPolicy> flip;
    long long flip_episodes = 10000;
    std::optional<double> flip_alpha;            // LP constraint the flip was built for
    std::optional<double> flip_predicted_value;  // LP value at flip_alpha

    /// Throws ConfigError on a semantic problem.
    void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and bad
/// values raise ConfigError naming `source:line`.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");

/// Applies settings on top of `base` (later files override earlier ones).
void apply_config(RunConfig& base, std::istream& in, const std::string& source);

RunConfig load_config(const std::string& path);

/// Sorted `key = value` lines for every setting that can change results.
/// Excludes io.out_dir and seed.
std::string canonical_config(const RunConfig& cfg);

/// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const RunConfig& cfg);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace flipchance
