#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "flipchance/env.hpp"
#include "flipchance/planner.hpp"
#include "flipchance/rng.hpp"

namespace flipchance {

struct DatasetEntry {
    Vec2 state;
    Vec2 action;
};

enum class PolicyKind { RecedingHorizon, NearestNeighbor };

/// Dataset positions sorted by (state.x, position); lets the neighbor
/// search scan a vertical strip instead of the whole dataset.
struct NnIndex {
    std::vector<std::uint32_t> order;
    std::vector<double> xs;  // xs[i] = dataset[order[i]].state.x
};

/// Deterministic state-feedback policy indexed by the inflation parameter.
struct DeterministicPolicy {
    PolicyKind kind = PolicyKind::RecedingHorizon;
    double beta = 0.0;
    std::vector<DatasetEntry> dataset;  // NearestNeighbor only
    int knn_k = 5;
    std::string policy_id;
    /// Optional search index; `act` falls back to a linear scan without it.
    std::shared_ptr<const NnIndex> index;

    void validate() const;
};

/// Builds policy.index from policy.dataset.
void index_policy(DeterministicPolicy& policy);

/// "rh-b1.5", "nn-b2.05", ...
std::string make_policy_id(PolicyKind kind, double beta);

const char* to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& text);

using StateSampler = std::function<Vec2(Stream&)>;

/// Uniform over the bounding box of start, goal and obstacles grown by
/// `margin`, rejecting unsafe draws.
StateSampler arena_sampler(const EnvSpec& spec, double margin = 2.0);

/// Always returns `s`.
StateSampler fixed_sampler(Vec2 s);

class DatasetGenerationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// n (state, first planned action) pairs. Entry i draws from its own
/// substream of `stream`, so the result does not depend on `workers`.
/// Infeasible states are redrawn up to `max_attempts` times per entry.
std::vector<DatasetEntry> gen_dataset(double beta, std::size_t n, const StateSampler& sampler, const EnvSpec& spec,
                                      const PlannerOpts& opts, const Stream& stream, int max_attempts = 200,
                                      int workers = 1);

/// Action of `policy` at state `s`, `step_index` steps into the episode.
/// RecedingHorizon replans over the remaining horizon (may throw
/// NoFeasiblePlan); NearestNeighbor is time invariant.
Vec2 act(const DeterministicPolicy& policy, Vec2 s, int step_index, const EnvSpec& spec, const PlannerOpts& opts);

enum class FlipGranularity { PerEpisode, PerStep };

const char* to_string(FlipGranularity g);
FlipGranularity parse_granularity(const std::string& text);

/// Randomized choice between two registered policies; `weight` is the
/// probability of policy_a.
struct FlipPolicy {
    std::string policy_a;
    std::string policy_b;
    double weight = 1.0;
    FlipGranularity granularity = FlipGranularity::PerEpisode;

    void validate() const;
};

/// Draws kappa uniform on (0, 1] and returns policy_a iff kappa <= weight.
const std::string& flip_choose(const FlipPolicy& flip, Stream& stream);

class UnknownPolicy : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class PolicyRegistry {
public:
    /// Validates, indexes and stores the policy; replaces one with the same id.
    void add(DeterministicPolicy policy);
    const DeterministicPolicy& get(const std::string& id) const;
    bool contains(const std::string& id) const { return policies_.count(id) != 0; }
    std::vector<std::string> ids() const;

private:
    std::map<std::string, DeterministicPolicy> policies_;
};

struct DatasetFile {
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::vector<DatasetEntry> entries;
};

/// CSV with header `sx,sy,ax,ay` preceded by a `# beta=<b> seed=<s>` line.
void write_dataset(std::ostream& out, const DatasetFile& file);
DatasetFile read_dataset(std::istream& in);

/// flip.a / flip.b / flip.weight / flip.granularity lines.
void write_flip(std::ostream& out, const FlipPolicy& flip);

}  // namespace flipchance
