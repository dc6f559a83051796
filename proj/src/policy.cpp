#include "flipchance/policy.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "flipchance/parallel.hpp"

namespace flipchance {

namespace {

std::string fmt(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("dataset: bad " + what + " '" + text + "'");
    }
}

}  // namespace

void DeterministicPolicy::validate() const {
    if (!std::isfinite(beta) || beta < 0.0) throw std::invalid_argument("policy: beta must be finite and >= 0");
    if (knn_k < 1) throw std::invalid_argument("policy: knn_k must be >= 1");
    if (kind == PolicyKind::NearestNeighbor && dataset.empty())
        throw std::invalid_argument("policy: NearestNeighbor requires a nonempty dataset");
    if (policy_id.empty()) throw std::invalid_argument("policy: empty policy_id");
}

std::string make_policy_id(PolicyKind kind, double beta) {
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), "%s-b%.6g", kind == PolicyKind::RecedingHorizon ? "rh" : "nn", beta);
    return buf.data();
}

const char* to_string(PolicyKind kind) {
    return kind == PolicyKind::RecedingHorizon ? "receding_horizon" : "nearest_neighbor";
}

PolicyKind parse_policy_kind(const std::string& text) {
    if (text == "receding_horizon" || text == "rh") return PolicyKind::RecedingHorizon;
    if (text == "nearest_neighbor" || text == "nn") return PolicyKind::NearestNeighbor;
    throw std::invalid_argument("unknown policy kind '" + text + "'");
}

StateSampler arena_sampler(const EnvSpec& spec, double margin) {
    double lo_x = std::min(spec.start.x, spec.goal.x), hi_x = std::max(spec.start.x, spec.goal.x);
    double lo_y = std::min(spec.start.y, spec.goal.y), hi_y = std::max(spec.start.y, spec.goal.y);
    for (const auto& o : spec.obstacles) {
        lo_x = std::min(lo_x, o.center.x - o.radius);
        hi_x = std::max(hi_x, o.center.x + o.radius);
        lo_y = std::min(lo_y, o.center.y - o.radius);
        hi_y = std::max(hi_y, o.center.y + o.radius);
    }
    lo_x -= margin, lo_y -= margin, hi_x += margin, hi_y += margin;
    return [=](Stream& rng) {
        for (int i = 0; i < 100000; ++i) {
            const Vec2 s{lo_x + (hi_x - lo_x) * rng.uniform(), lo_y + (hi_y - lo_y) * rng.uniform()};
            if (!is_unsafe(s, spec)) return s;
        }
        throw std::runtime_error("arena_sampler: no safe state found");
    };
}

StateSampler fixed_sampler(Vec2 s) {
    return [s](Stream&) { return s; };
}

std::vector<DatasetEntry> gen_dataset(double beta, std::size_t n, const StateSampler& sampler, const EnvSpec& spec,
                                      const PlannerOpts& opts, const Stream& stream, int max_attempts, int workers) {
    if (n == 0) throw std::invalid_argument("gen_dataset: n must be >= 1");
    if (max_attempts < 1) throw std::invalid_argument("gen_dataset: max_attempts must be >= 1");
    std::vector<DatasetEntry> out(n);
    parallel_for(n, workers, [&](std::size_t i) {
        Stream rng = stream.substream(i);
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            const Vec2 s = sampler(rng);
            try {
                out[i] = {s, first_action(s, beta, spec, opts)};
                return;
            } catch (const NoFeasiblePlan&) {
            }
        }
        throw DatasetGenerationFailed("gen_dataset: entry " + std::to_string(i) + " found no feasible state in " +
                                      std::to_string(max_attempts) + " attempts (beta " + fmt(beta) + ")");
    });
    return out;
}

Vec2 act(const DeterministicPolicy& policy, Vec2 s, int step_index, const EnvSpec& spec, const PlannerOpts& opts) {
    if (!s.finite()) throw std::invalid_argument("act: state must be finite");
    if (policy.kind == PolicyKind::RecedingHorizon) {
        const int remaining = std::max(1, spec.horizon - step_index);
        return first_action(s, policy.beta, spec, opts, remaining);
    }
    const auto& data = policy.dataset;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(policy.knn_k), data.size());
    // (distance^2, index) of the k best so far, sorted ascending; the pair
    // ordering breaks distance ties toward the lower index.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k + 1);
    auto offer = [&](std::size_t i) {
        const std::pair<double, std::size_t> cand{(data[i].state - s).squared_norm(), i};
        if (best.size() == k && !(cand < best.back())) return;
        best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        if (best.size() > k) best.pop_back();
    };
    const NnIndex* index = policy.index.get();
    if (index && index->order.size() == data.size()) {
        // Walk outward from s.x; a side is done once its x gap alone exceeds
        // the current k-th distance (equal gaps may still win on index).
        const auto& xs = index->xs;
        std::size_t right = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), s.x) - xs.begin());
        std::size_t left = right;
        bool go_left = left > 0, go_right = right < xs.size();
        while (go_left || go_right) {
            const double bound = best.size() == k ? best.back().first : std::numeric_limits<double>::infinity();
            if (go_left) {
                const double dx = s.x - xs[left - 1];
                if (dx * dx > bound) {
                    go_left = false;
                } else {
                    offer(index->order[--left]);
                    go_left = left > 0;
                }
            }
            if (go_right) {
                const double dx = xs[right] - s.x;
                if (dx * dx > bound) {
                    go_right = false;
                } else {
                    offer(index->order[right++]);
                    go_right = right < xs.size();
                }
            }
        }
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) offer(i);
    }
    double den = 0.0;
    for (const auto& [d2, i] : best) den += 1.0 / (std::sqrt(d2) + 1e-9);
    // normalized weights, so a lone neighbor comes back bit-exact
    Vec2 mean{};
    for (const auto& [d2, i] : best) mean = mean + ((1.0 / (std::sqrt(d2) + 1e-9)) / den) * data[i].action;
    return clamp_action(mean, spec.action_bound);
}

const char* to_string(FlipGranularity g) { return g == FlipGranularity::PerEpisode ? "per_episode" : "per_step"; }

FlipGranularity parse_granularity(const std::string& text) {
    if (text == "per_episode") return FlipGranularity::PerEpisode;
    if (text == "per_step") return FlipGranularity::PerStep;
    throw std::invalid_argument("unknown flip granularity '" + text + "'");
}

void FlipPolicy::validate() const {
    if (!(weight >= 0.0 && weight <= 1.0)) throw std::invalid_argument("flip: weight must lie in [0, 1]");
    if (policy_a.empty() || policy_b.empty()) throw std::invalid_argument("flip: empty policy id");
}

const std::string& flip_choose(const FlipPolicy& flip, Stream& stream) {
    const double kappa = static_cast<double>((stream.next_u64() >> 11) + 1) * 0x1.0p-53;
    return kappa <= flip.weight ? flip.policy_a : flip.policy_b;
}

void index_policy(DeterministicPolicy& policy) {
    auto idx = std::make_shared<NnIndex>();
    idx->order.resize(policy.dataset.size());
    for (std::size_t i = 0; i < idx->order.size(); ++i) idx->order[i] = static_cast<std::uint32_t>(i);
    std::sort(idx->order.begin(), idx->order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double xa = policy.dataset[a].state.x, xb = policy.dataset[b].state.x;
        return xa < xb || (xa == xb && a < b);
    });
    idx->xs.reserve(idx->order.size());
    for (auto i : idx->order) idx->xs.push_back(policy.dataset[i].state.x);
    policy.index = std::move(idx);
}

void PolicyRegistry::add(DeterministicPolicy policy) {
    policy.validate();
    if (policy.kind == PolicyKind::NearestNeighbor) index_policy(policy);
    const std::string id = policy.policy_id;
    policies_.insert_or_assign(id, std::move(policy));
}

const DeterministicPolicy& PolicyRegistry::get(const std::string& id) const {
    const auto it = policies_.find(id);
    if (it == policies_.end()) throw UnknownPolicy("unknown policy id '" + id + "'");
    return it->second;
}

std::vector<std::string> PolicyRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : policies_) out.push_back(id);
    return out;
}

void write_dataset(std::ostream& out, const DatasetFile& file) {
    out << "# beta=" << fmt(file.beta) << " seed=" << file.seed << "\n";
    out << "sx,sy,ax,ay\n";
    for (const auto& e : file.entries)
        out << fmt(e.state.x) << ',' << fmt(e.state.y) << ',' << fmt(e.action.x) << ',' << fmt(e.action.y) << '\n';
}

DatasetFile read_dataset(std::istream& in) {
    DatasetFile file;
    bool have_beta = false, have_header = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream words(line.substr(1));
            std::string word;
            while (words >> word) {
                if (word.rfind("beta=", 0) == 0) {
                    file.beta = parse_double(word.substr(5), "beta");
                    have_beta = true;
                } else if (word.rfind("seed=", 0) == 0) {
                    try {
                        file.seed = std::stoull(word.substr(5));
                    } catch (const std::exception&) {
                        throw std::runtime_error("dataset: bad seed '" + word.substr(5) + "'");
                    }
                }
            }
            continue;
        }
        if (!have_header) {
            if (line != "sx,sy,ax,ay") throw std::runtime_error("dataset: expected header sx,sy,ax,ay");
            have_header = true;
            continue;
        }
        std::array<double, 4> v{};
        std::istringstream cells(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(cells, cell, ',')) {
            if (c >= v.size()) throw std::runtime_error("dataset: too many columns on line " + std::to_string(line_no));
            v[c++] = parse_double(cell, "value on line " + std::to_string(line_no));
        }
        if (c != v.size()) throw std::runtime_error("dataset: expected 4 columns on line " + std::to_string(line_no));
        file.entries.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
    if (!have_beta) throw std::runtime_error("dataset: missing '# beta=' line");
    if (!have_header) throw std::runtime_error("dataset: missing header");
    return file;
}

void write_flip(std::ostream& out, const FlipPolicy& flip) {
    out << "flip.a = " << flip.policy_a << "\n"
        << "flip.b = " << flip.policy_b << "\n"
        << "flip.weight = " << fmt(flip.weight) << "\n"
        << "flip.granularity = " << to_string(flip.granularity) << "\n";
}

}  // namespace flipchance
