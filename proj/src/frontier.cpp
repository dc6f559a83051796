#include "flipchance/frontier.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "flipchance/parallel.hpp"

namespace flipchance {

namespace {

constexpr std::uint64_t kDatasetTag = 0xda7a5e7ULL;
constexpr std::uint64_t kEvalTag = 0xe7a1ULL;

}  // namespace

std::vector<double> default_beta_grid() {
    std::vector<double> out;
    for (int i = 0; i <= 24; ++i) out.push_back((100.0 + 5.0 * i) / 100.0);
    return out;
}

DeterministicPolicy build_policy(double beta, const EnvSpec& spec, const PlannerOpts& opts, const SweepOpts& sweep,
                                 std::uint64_t seed) {
    DeterministicPolicy p;
    p.kind = sweep.kind;
    p.beta = beta;
    p.knn_k = sweep.knn_k;
    p.policy_id = make_policy_id(sweep.kind, beta);
    if (sweep.kind == PolicyKind::NearestNeighbor)
        p.dataset = gen_dataset(beta, sweep.dataset_size, arena_sampler(spec, sweep.sampler_margin), spec, opts,
                                Stream(derive_seed(seed, kDatasetTag)), sweep.max_attempts, sweep.workers);
    p.validate();
    return p;
}

std::uint64_t beta_eval_seed(std::uint64_t seed, double beta) {
    // +0.0 and -0.0 are the same beta
    return derive_seed(derive_seed(seed, kEvalTag), std::bit_cast<std::uint64_t>(beta + 0.0));
}

SweepResult sweep_beta(const std::vector<double>& betas, long long n_episodes, const EnvSpec& spec,
                       const PlannerOpts& opts, double gamma_unsafe, std::uint64_t seed, const SweepOpts& sweep) {
    if (betas.empty()) throw std::invalid_argument("sweep_beta: empty beta list");
    spec.validate();
    opts.validate();
    SweepResult result;
    for (double beta : betas) {
        try {
            DeterministicPolicy policy = build_policy(beta, spec, opts, sweep, seed);
            const std::string id = policy.policy_id;
            result.registry.add(std::move(policy));
            FrontierPoint pt;
            pt.beta = beta;
            pt.policy_id = id;
            pt.report = evaluate(RolloutPolicy::single(id), result.registry, n_episodes, spec, opts, gamma_unsafe,
                                 beta_eval_seed(seed, beta), sweep.workers);
            pt.alpha_hat = pt.report.violation_prob;
            pt.alpha_ci = pt.report.violation_ci;
            pt.j_hat = pt.report.mean_reward;
            pt.j_stderr = pt.report.reward_stderr;
            result.points.push_back(std::move(pt));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            result.failures.push_back({beta, e.what()});
        }
    }
    return result;
}

std::vector<RiskReward> risk_reward(const std::vector<FrontierPoint>& points) {
    std::vector<RiskReward> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p.alpha_hat, p.j_hat});
    return out;
}

LpSolution solve_mixture_lp(const std::vector<FrontierPoint>& points, double alpha) {
    if (points.empty()) throw std::invalid_argument("solve_mixture_lp: no frontier points");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("solve_mixture_lp: alpha must lie in [0, 1)");
    const auto rr = risk_reward(points);
    return solve_mixture_lp(std::span<const RiskReward>(rr), alpha);
}

std::size_t best_deterministic(const std::vector<FrontierPoint>& points, double alpha) {
    std::size_t best = points.size();
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].alpha_hat <= alpha && (best == points.size() || points[i].j_hat > points[best].j_hat)) best = i;
    if (best == points.size()) throw Infeasible("no frontier point meets the violation limit");
    return best;
}

FlipPolicy build_flip(const std::vector<FrontierPoint>& points, const LpSolution& solution, FlipGranularity granularity) {
    if (solution.support.empty() || solution.support.size() > 2) throw std::invalid_argument("build_flip: bad support");
    for (const auto& s : solution.support)
        if (s.index >= points.size()) throw std::out_of_range("build_flip: support index out of range");
    FlipPolicy f;
    f.granularity = granularity;
    const auto& first = solution.support.front();
    if (solution.support.size() == 1) {
        f.policy_a = f.policy_b = points[first.index].policy_id;
        f.weight = 1.0;
        return f;
    }
    const auto& second = solution.support.back();
    const bool first_lower = points[first.index].alpha_hat <= points[second.index].alpha_hat;
    const auto& lo = first_lower ? first : second;
    const auto& hi = first_lower ? second : first;
    f.policy_a = points[lo.index].policy_id;
    f.policy_b = points[hi.index].policy_id;
    f.weight = lo.weight;
    return f;
}

FlipPolicy build_flip(const std::vector<FrontierPoint>& points, double alpha) {
    return build_flip(points, solve_mixture_lp(points, alpha));
}

void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& points) {
    const auto f = format_double;
    out << "beta,alpha_hat,alpha_lo,alpha_hi,j_hat,j_stderr,policy_id,discounted_unsafe,marginal_sum,"
           "mean_step_reward,n_episodes,planner_failures\n";
    for (const auto& p : points)
        out << f(p.beta) << ',' << f(p.alpha_hat) << ',' << f(p.alpha_ci.first) << ',' << f(p.alpha_ci.second) << ','
            << f(p.j_hat) << ',' << f(p.j_stderr) << ',' << p.policy_id << ',' << f(p.report.discounted_unsafe) << ','
            << f(p.report.marginal_sum) << ',' << f(p.report.mean_step_reward) << ',' << p.report.n_episodes << ','
            << p.report.planner_failures << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double to_double(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw std::runtime_error("frontier CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
}

}  // namespace

std::vector<FrontierPoint> read_frontier_csv(std::istream& in) {
    std::vector<FrontierPoint> points;
    std::map<std::string, std::size_t> col;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        if (col.empty()) {
            for (std::size_t i = 0; i < cells.size(); ++i) col[cells[i]] = i;
            for (const char* need : {"beta", "alpha_hat", "alpha_lo", "alpha_hi", "j_hat", "j_stderr", "policy_id"})
                if (!col.count(need)) throw std::runtime_error(std::string("frontier CSV: missing column ") + need);
            continue;
        }
        if (cells.size() != col.size())
            throw std::runtime_error("frontier CSV line " + std::to_string(line_no) + ": wrong number of columns");
        auto num = [&](const char* name) { return to_double(cells[col.at(name)], line_no); };
        auto opt = [&](const char* name, double fallback) { return col.count(name) ? num(name) : fallback; };
        FrontierPoint p;
        p.beta = num("beta");
        p.alpha_hat = num("alpha_hat");
        p.alpha_ci = {num("alpha_lo"), num("alpha_hi")};
        p.j_hat = num("j_hat");
        p.j_stderr = num("j_stderr");
        p.policy_id = cells[col.at("policy_id")];
        if (!(p.alpha_hat >= 0.0 && p.alpha_hat <= 1.0))
            throw std::runtime_error("frontier CSV line " + std::to_string(line_no) + ": alpha_hat outside [0, 1]");
        p.report.policy = p.policy_id;
        p.report.violation_prob = p.alpha_hat;
        p.report.violation_ci = p.alpha_ci;
        p.report.mean_reward = p.j_hat;
        p.report.reward_stderr = p.j_stderr;
        p.report.discounted_unsafe = opt("discounted_unsafe", 0.0);
        p.report.marginal_sum = opt("marginal_sum", 0.0);
        p.report.mean_step_reward = opt("mean_step_reward", 0.0);
        p.report.n_episodes = static_cast<long long>(opt("n_episodes", 0.0));
        p.report.planner_failures = static_cast<long long>(opt("planner_failures", 0.0));
        points.push_back(std::move(p));
    }
    if (col.empty()) throw std::runtime_error("frontier CSV: missing header");
    return points;
}

}  // namespace flipchance
