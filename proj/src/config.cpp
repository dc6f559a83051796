#include "flipchance/config.hpp"

#include <cmath>
#include <limits>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "flipchance/montecarlo.hpp"

namespace flipchance {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
}

long long to_int(const std::string& text) {
    const std::string t = trim(text);
    std::size_t used = 0;
    const long long v = std::stoll(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
}

Vec2 to_vec2(const std::string& text) {
    const auto v = parse_double_list(text);
    if (v.size() != 2) throw std::invalid_argument(text);
    return {v[0], v[1]};
}

struct ObstacleDraft {
    std::optional<Vec2> center;
    std::optional<double> radius;
};

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        if (trim(cell).empty()) throw std::invalid_argument("empty list entry");
        out.push_back(to_double(cell));
    }
    return out;
}

void RunConfig::validate() const {
    try {
        env.validate();
        planner.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (betas.empty()) throw ConfigError("sweep.betas is empty");
    for (double b : betas)
        if (!std::isfinite(b) || b < 0.0) throw ConfigError("sweep.betas entries must be finite and >= 0");
    if (n_episodes < 1) throw ConfigError("sweep.n_episodes must be >= 1");
    if (!(gamma_unsafe > 0.0 && gamma_unsafe < 1.0)) throw ConfigError("sweep.gamma_unsafe must lie in (0, 1)");
    if (sweep.dataset_size < 1) throw ConfigError("sweep.dataset_size must be >= 1");
    if (sweep.knn_k < 1) throw ConfigError("sweep.knn_k must be >= 1");
    if (sweep.max_attempts < 1) throw ConfigError("sweep.max_attempts must be >= 1");
    if (!(sweep.sampler_margin >= 0.0)) throw ConfigError("sweep.sampler_margin must be >= 0");
    for (double a : lp_alphas)
        if (!(a >= 0.0 && a < 1.0)) throw ConfigError("lp.alphas entries must lie in [0, 1)");
    if (lp_uniform_samples < 0) throw ConfigError("lp.uniform_samples must be >= 0");
    if (flip_episodes < 1) throw ConfigError("flip.n_episodes must be >= 1");
    if (flip) {
        try {
            flip->validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
}

void apply_config(RunConfig& cfg, std::istream& in, const std::string& source) {
    std::map<int, ObstacleDraft> drafts;
    bool clear_obstacles = false;
    FlipPolicy flip = cfg.flip.value_or(FlipPolicy{});
    bool flip_touched = false;

    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"env.start", [&](const std::string& v) { cfg.env.start = to_vec2(v); }},
        {"env.goal", [&](const std::string& v) { cfg.env.goal = to_vec2(v); }},
        {"env.obstacles",
         [&](const std::string& v) {
             if (trim(v) != "none") throw std::invalid_argument(v);
             clear_obstacles = true;
         }},
        {"env.noise_std", [&](const std::string& v) { cfg.env.noise_std = to_double(v); }},
        {"env.dt", [&](const std::string& v) { cfg.env.dt = to_double(v); }},
        {"env.horizon", [&](const std::string& v) { cfg.env.horizon = static_cast<int>(to_int(v)); }},
        {"env.action_bound", [&](const std::string& v) { cfg.env.action_bound = to_double(v); }},
        {"env.reward_eps", [&](const std::string& v) { cfg.env.reward_eps = to_double(v); }},
        {"planner.penalty_init", [&](const std::string& v) { cfg.planner.penalty_init = to_double(v); }},
        {"planner.penalty_growth", [&](const std::string& v) { cfg.planner.penalty_growth = to_double(v); }},
        {"planner.penalty_rounds", [&](const std::string& v) { cfg.planner.penalty_rounds = static_cast<int>(to_int(v)); }},
        {"planner.inner_steps", [&](const std::string& v) { cfg.planner.inner_steps = static_cast<int>(to_int(v)); }},
        {"planner.damping", [&](const std::string& v) { cfg.planner.damping = to_double(v); }},
        {"planner.feas_tol", [&](const std::string& v) { cfg.planner.feas_tol = to_double(v); }},
        {"planner.restarts", [&](const std::string& v) { cfg.planner.restarts = static_cast<int>(to_int(v)); }},
        {"sweep.betas",
         [&](const std::string& v) { cfg.betas = trim(v) == "default" ? default_beta_grid() : parse_double_list(v); }},
        {"sweep.n_episodes", [&](const std::string& v) { cfg.n_episodes = to_int(v); }},
        {"sweep.gamma_unsafe", [&](const std::string& v) { cfg.gamma_unsafe = to_double(v); }},
        {"sweep.policy", [&](const std::string& v) { cfg.sweep.kind = parse_policy_kind(trim(v)); }},
        {"sweep.dataset_size",
         [&](const std::string& v) {
             const long long n = to_int(v);
             if (n < 1) throw std::invalid_argument(v);
             cfg.sweep.dataset_size = static_cast<std::size_t>(n);
         }},
        {"sweep.knn_k", [&](const std::string& v) { cfg.sweep.knn_k = static_cast<int>(to_int(v)); }},
        {"sweep.sampler_margin", [&](const std::string& v) { cfg.sweep.sampler_margin = to_double(v); }},
        {"sweep.max_attempts", [&](const std::string& v) { cfg.sweep.max_attempts = static_cast<int>(to_int(v)); }},
        {"lp.alphas",
         [&](const std::string& v) { cfg.lp_alphas = trim(v) == "auto" ? std::vector<double>{} : parse_double_list(v); }},
        {"lp.uniform_samples", [&](const std::string& v) { cfg.lp_uniform_samples = static_cast<int>(to_int(v)); }},
        {"io.out_dir",
         [&](const std::string& v) {
             if (trim(v).empty()) throw std::invalid_argument(v);
             cfg.out_dir = trim(v);
         }},
        {"seed", [&](const std::string& v) { cfg.seed = std::stoull(trim(v)); }},
        {"flip.a", [&](const std::string& v) { flip.policy_a = trim(v), flip_touched = true; }},
        {"flip.b", [&](const std::string& v) { flip.policy_b = trim(v), flip_touched = true; }},
        {"flip.weight", [&](const std::string& v) { flip.weight = to_double(v), flip_touched = true; }},
        {"flip.granularity",
         [&](const std::string& v) { flip.granularity = parse_granularity(trim(v)), flip_touched = true; }},
        {"flip.n_episodes", [&](const std::string& v) { cfg.flip_episodes = to_int(v); }},
        {"flip.alpha", [&](const std::string& v) { cfg.flip_alpha = to_double(v); }},
        {"flip.predicted_value", [&](const std::string& v) { cfg.flip_predicted_value = to_double(v); }},
    };

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key.rfind("env.obstacle.", 0) == 0) {
                // env.obstacle.<i>.center / env.obstacle.<i>.radius
                const std::string rest = key.substr(13);
                const auto dot = rest.find('.');
                if (dot == std::string::npos || dot == 0) throw ConfigError(where + ": unknown key '" + key + "'");
                const std::string index_text = rest.substr(0, dot);
                for (char c : index_text)
                    if (c < '0' || c > '9') throw ConfigError(where + ": unknown key '" + key + "'");
                const int index = std::stoi(index_text);
                const std::string field = rest.substr(dot + 1);
                if (field == "center")
                    drafts[index].center = to_vec2(value);
                else if (field == "radius")
                    drafts[index].radius = to_double(value);
                else
                    throw ConfigError(where + ": unknown key '" + key + "'");
                continue;
            }
            const auto it = setters.find(key);
            if (it == setters.end()) throw ConfigError(where + ": unknown key '" + key + "'");
            it->second(value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(where + ": bad value '" + value + "' for '" + key + "'");
        }
    }

    if (clear_obstacles && !drafts.empty())
        throw ConfigError(source + ": env.obstacles = none conflicts with env.obstacle.* keys");
    if (clear_obstacles) cfg.env.obstacles.clear();
    if (!drafts.empty()) {
        std::vector<Disk> disks;
        int expect = 0;
        for (const auto& [index, d] : drafts) {
            if (index != expect++) throw ConfigError(source + ": obstacle indices must run 0, 1, 2, ...");
            if (!d.center || !d.radius)
                throw ConfigError(source + ": obstacle " + std::to_string(index) + " needs center and radius");
            disks.push_back({*d.center, *d.radius});
        }
        cfg.env.obstacles = std::move(disks);
    }
    if (flip_touched) cfg.flip = flip;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
    RunConfig cfg;
    apply_config(cfg, in, source);
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
    return parse_config(in, path);
}

std::string canonical_config(const RunConfig& cfg) {
    const auto f = format_double;
    auto list = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
        return s;
    };
    std::map<std::string, std::string> kv;
    kv["env.start"] = f(cfg.env.start.x) + "," + f(cfg.env.start.y);
    kv["env.goal"] = f(cfg.env.goal.x) + "," + f(cfg.env.goal.y);
    kv["env.obstacle.count"] = std::to_string(cfg.env.obstacles.size());
    for (std::size_t i = 0; i < cfg.env.obstacles.size(); ++i) {
        const auto& o = cfg.env.obstacles[i];
        kv["env.obstacle." + std::to_string(i) + ".center"] = f(o.center.x) + "," + f(o.center.y);
        kv["env.obstacle." + std::to_string(i) + ".radius"] = f(o.radius);
    }
    kv["env.noise_std"] = f(cfg.env.noise_std);
    kv["env.dt"] = f(cfg.env.dt);
    kv["env.horizon"] = std::to_string(cfg.env.horizon);
    kv["env.action_bound"] = f(cfg.env.action_bound);
    kv["env.reward_eps"] = f(cfg.env.reward_eps);
    kv["planner.penalty_init"] = f(cfg.planner.penalty_init);
    kv["planner.penalty_growth"] = f(cfg.planner.penalty_growth);
    kv["planner.penalty_rounds"] = std::to_string(cfg.planner.penalty_rounds);
    kv["planner.inner_steps"] = std::to_string(cfg.planner.inner_steps);
    kv["planner.damping"] = f(cfg.planner.damping);
    kv["planner.feas_tol"] = f(cfg.planner.feas_tol);
    kv["planner.restarts"] = std::to_string(cfg.planner.restarts);
    kv["sweep.betas"] = list(cfg.betas);
    kv["sweep.n_episodes"] = std::to_string(cfg.n_episodes);
    kv["sweep.gamma_unsafe"] = f(cfg.gamma_unsafe);
    kv["sweep.policy"] = to_string(cfg.sweep.kind);
    kv["sweep.dataset_size"] = std::to_string(cfg.sweep.dataset_size);
    kv["sweep.knn_k"] = std::to_string(cfg.sweep.knn_k);
    kv["sweep.sampler_margin"] = f(cfg.sweep.sampler_margin);
    kv["sweep.max_attempts"] = std::to_string(cfg.sweep.max_attempts);
    kv["lp.alphas"] = cfg.lp_alphas.empty() ? "auto" : list(cfg.lp_alphas);
    kv["lp.uniform_samples"] = std::to_string(cfg.lp_uniform_samples);
    if (cfg.flip) {
        kv["flip.a"] = cfg.flip->policy_a;
        kv["flip.b"] = cfg.flip->policy_b;
        kv["flip.weight"] = f(cfg.flip->weight);
        kv["flip.granularity"] = to_string(cfg.flip->granularity);
    }
    kv["flip.n_episodes"] = std::to_string(cfg.flip_episodes);
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 0xf];
    return out;
}

}  // namespace flipchance
