#include "app.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flipchance/bounds.hpp"
#include "flipchance/config.hpp"
#include "flipchance/frontier.hpp"
#include "flipchance/mixture_lp.hpp"
#include "flipchance/montecarlo.hpp"
#include "flipchance/tabular.hpp"
#include "svg.hpp"

namespace flipchance::app {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kDefaultSeed = 42;
constexpr std::uint64_t kAlphaSampleTag = 0xa1fa;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a command produced nothing feasible at all.
class AllInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::vector<std::string> config_files;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string out_dir;
};

struct Context {
    RunConfig cfg;
    std::uint64_t seed = kDefaultSeed;
    int workers = 1;
    std::string hash;
    std::string out_dir;
};

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
        const auto v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": bad seed '" + text + "'");
    }
}

Context make_context(const Common& common, const std::vector<std::string>& overlays = {}) {
    Context ctx;
    auto load = [&](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config '" + path + "'");
        apply_config(ctx.cfg, in, path);
    };
    for (const auto& path : common.config_files) load(path);
    for (const auto& path : overlays) load(path);
    ctx.cfg.validate();
    // flag > environment > config file > built-in default
    if (common.seed) {
        ctx.seed = *common.seed;
    } else if (const char* env = std::getenv("FLIPCHANCE_SEED"); env && *env) {
        ctx.seed = parse_seed(env, "FLIPCHANCE_SEED");
    } else if (ctx.cfg.seed) {
        ctx.seed = *ctx.cfg.seed;
    }
    if (common.workers < 1) throw UsageError("--workers must be >= 1");
    ctx.workers = common.workers;
    ctx.cfg.sweep.workers = common.workers;
    ctx.hash = config_hash(ctx.cfg);
    ctx.out_dir = common.out_dir.empty() ? ctx.cfg.out_dir : common.out_dir;
    return ctx;
}

std::string manifest(const Context& ctx, const std::string& command) {
    return "# flipchance " + std::string(kVersion) + " command=" + command + " config_hash=" + ctx.hash +
           " seed=" + std::to_string(ctx.seed) + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void add_common(CLI::App* sub, Common& common) {
    sub->add_option("--config", common.config_files, "key = value settings file (repeatable, later wins)");
    sub->add_option_function<std::string>(
        "--seed", [&common](const std::string& s) { common.seed = parse_seed(s, "--seed"); },
        "master seed (overrides FLIPCHANCE_SEED and the config)");
    sub->add_option("--workers", common.workers, "worker threads; never changes results")->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out_dir, "output directory (overrides io.out_dir)");
}

// Policy ids look like "nn-b1.5" or "rh-b2"; they carry everything needed
// to rebuild the policy under a given config and seed.
DeterministicPolicy policy_from_id(const std::string& id, const Context& ctx) {
    const auto dash = id.find("-b");
    if (dash == std::string::npos) throw UsageError("cannot resolve policy id '" + id + "'");
    SweepOpts opts = ctx.cfg.sweep;
    try {
        opts.kind = parse_policy_kind(id.substr(0, dash));
    } catch (const std::invalid_argument&) {
        throw UsageError("cannot resolve policy id '" + id + "'");
    }
    double beta = 0.0;
    try {
        std::size_t used = 0;
        beta = std::stod(id.substr(dash + 2), &used);
        if (used != id.size() - dash - 2) throw std::invalid_argument(id);
    } catch (const std::exception&) {
        throw UsageError("cannot resolve policy id '" + id + "'");
    }
    DeterministicPolicy p = build_policy(beta, ctx.cfg.env, ctx.cfg.planner, opts, ctx.seed);
    if (p.policy_id != id) throw UsageError("policy id '" + id + "' is not canonical (expected '" + p.policy_id + "')");
    return p;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const Common& common, const std::optional<std::string>& betas, std::optional<long long> episodes,
              bool save_datasets) {
    Context ctx = make_context(common);
    if (betas) {
        try {
            ctx.cfg.betas = parse_double_list(*betas);
        } catch (const std::exception&) {
            throw UsageError("--betas: bad list '" + *betas + "'");
        }
    }
    if (episodes) ctx.cfg.n_episodes = *episodes;
    try {
        ctx.cfg.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    ctx.hash = config_hash(ctx.cfg);

    const SweepResult res = sweep_beta(ctx.cfg.betas, ctx.cfg.n_episodes, ctx.cfg.env, ctx.cfg.planner,
                                       ctx.cfg.gamma_unsafe, ctx.seed, ctx.cfg.sweep);
    const fs::path dir(ctx.out_dir);

    std::ostringstream frontier;
    frontier << manifest(ctx, "sweep");
    for (const auto& f : res.failures) frontier << "# failed beta=" << format_double(f.beta) << ": " << f.message << "\n";
    write_frontier_csv(frontier, res.points);
    write_file(dir / "frontier.csv", frontier.str());

    std::ostringstream reports;
    reports << manifest(ctx, "sweep");
    reports << "beta,";
    write_report_header(reports);
    for (const auto& p : res.points) {
        reports << format_double(p.beta) << ',';
        write_report_row(reports, p.report);
    }
    write_file(dir / "sweep_reports.csv", reports.str());

    std::ostringstream marg;
    marg << manifest(ctx, "sweep") << "beta,step,marginal\n";
    for (const auto& p : res.points)
        for (std::size_t k = 0; k < p.report.marginals.size(); ++k)
            marg << format_double(p.beta) << ',' << k + 1 << ',' << format_double(p.report.marginals[k]) << '\n';
    write_file(dir / "marginals.csv", marg.str());

    write_file(dir / "run_config.txt", manifest(ctx, "sweep") + "seed = " + std::to_string(ctx.seed) + "\n" +
                                           canonical_config(ctx.cfg));

    if (save_datasets) {
        for (const auto& id : res.registry.ids()) {
            const auto& p = res.registry.get(id);
            if (p.kind != PolicyKind::NearestNeighbor) continue;
            std::ostringstream ds;
            ds << manifest(ctx, "sweep");
            write_dataset(ds, {p.beta, ctx.seed, p.dataset});
            write_file(dir / "datasets" / (id + ".csv"), ds.str());
        }
    }

    std::cout << "sweep: " << res.points.size() << " points, " << res.failures.size() << " failed betas -> "
              << (dir / "frontier.csv").string() << "\n";
    for (const auto& f : res.failures) std::cerr << "beta " << f.beta << " failed: " << f.message << "\n";
    if (res.points.empty()) throw AllInfeasible("every beta failed");
    return kOk;
}

// ---------------------------------------------------------------- lp

std::vector<FrontierPoint> load_frontier(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open frontier '" + path + "'");
    try {
        return read_frontier_csv(in);
    } catch (const std::runtime_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::vector<double> lp_alpha_list(const Context& ctx, const std::vector<FrontierPoint>& points) {
    if (!ctx.cfg.lp_alphas.empty()) return ctx.cfg.lp_alphas;
    double lo = 1.0, hi = 0.0;
    for (const auto& p : points) lo = std::min(lo, p.alpha_hat), hi = std::max(hi, p.alpha_hat);
    std::vector<double> out;
    if (ctx.cfg.lp_uniform_samples > 0) {
        Stream rng(derive_seed(ctx.seed, kAlphaSampleTag));
        for (int i = 0; i < ctx.cfg.lp_uniform_samples; ++i) out.push_back(std::min(lo + (hi - lo) * rng.uniform(), 0.999999));
        return out;
    }
    // 0.01 grid over [lo, hi]
    for (long k = static_cast<long>(std::ceil(lo * 100.0 - 1e-9)); k <= static_cast<long>(std::floor(hi * 100.0 + 1e-9)); ++k)
        if (k < 100) out.push_back(static_cast<double>(k) / 100.0);
    return out;
}

// seed=<n> from the manifest line of a frontier CSV.
std::optional<std::uint64_t> manifest_seed(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        const auto pos = line.find(" seed=");
        if (pos == std::string::npos) continue;
        const auto end = line.find(' ', pos + 6);
        return parse_seed(line.substr(pos + 6, end == std::string::npos ? std::string::npos : end - pos - 6), path);
    }
    return std::nullopt;
}

bool seed_given(const Common& common) {
    const char* env = std::getenv("FLIPCHANCE_SEED");
    return common.seed || (env && *env);
}

int cmd_lp(const Common& common, std::string frontier_path, const std::optional<std::string>& alphas) {
    Context ctx = make_context(common);
    if (alphas) {
        try {
            ctx.cfg.lp_alphas = parse_double_list(*alphas);
            ctx.cfg.validate();
        } catch (const std::exception&) {
            throw UsageError("--alpha: bad list '" + *alphas + "'");
        }
        ctx.hash = config_hash(ctx.cfg);
    }
    if (frontier_path.empty()) frontier_path = (fs::path(ctx.out_dir) / "frontier.csv").string();
    const auto points = load_frontier(frontier_path);
    if (points.empty()) throw AllInfeasible("frontier '" + frontier_path + "' has no points");
    // The flip files must rebuild the sweep's policies, so they inherit the
    // sweep's seed unless one is given explicitly.
    if (!seed_given(common))
        if (const auto s = manifest_seed(frontier_path)) ctx.seed = *s;
    const auto list = lp_alpha_list(ctx, points);
    if (list.empty()) throw UsageError("no alpha values to solve for");

    const fs::path dir(ctx.out_dir);
    std::ostringstream csv;
    csv << manifest(ctx, "lp") << "# frontier=" << fs::path(frontier_path).filename().string() << "\n";
    csv << "alpha,status,value,risk,active,support,weights,policy_a,weight_a,policy_b,best_deterministic,"
           "best_deterministic_id,gain\n";
    int feasible = 0;
    for (double alpha : list) {
        try {
            const LpSolution sol = solve_mixture_lp(points, alpha);
            const FlipPolicy flip = build_flip(points, sol);
            const std::size_t det = best_deterministic(points, alpha);
            std::string support, weights;
            for (std::size_t i = 0; i < sol.support.size(); ++i) {
                support += (i ? ";" : "") + std::to_string(sol.support[i].index);
                weights += (i ? ";" : "") + format_double(sol.support[i].weight);
            }
            csv << format_double(alpha) << ",ok," << format_double(sol.value) << ',' << format_double(sol.risk) << ','
                << (sol.active_constraint ? 1 : 0) << ',' << support << ',' << weights << ',' << flip.policy_a << ','
                << format_double(flip.weight) << ',' << flip.policy_b << ',' << format_double(points[det].j_hat)
                << ',' << points[det].policy_id << ',' << format_double(sol.value / points[det].j_hat - 1.0) << '\n';
            std::ostringstream cfg;
            cfg << manifest(ctx, "lp") << "seed = " << ctx.seed << "\n";
            write_flip(cfg, flip);
            cfg << "flip.alpha = " << format_double(alpha) << "\n"
                << "flip.predicted_value = " << format_double(sol.value) << "\n";
            write_file(dir / "flips" / ("flip_a" + short_num(alpha) + ".cfg"), cfg.str());
            ++feasible;
        } catch (const Infeasible&) {
            csv << format_double(alpha) << ",infeasible,,,,,,,,,,,\n";
        }
    }
    write_file(dir / "lp.csv", csv.str());
    std::cout << "lp: " << feasible << "/" << list.size() << " feasible -> " << (dir / "lp.csv").string() << "\n";
    if (feasible == 0) throw AllInfeasible("every alpha is infeasible");
    return kOk;
}

// ---------------------------------------------------------------- flip-eval

int cmd_flip_eval(const Common& common, const std::vector<std::string>& flip_files, std::optional<long long> episodes,
                  const std::optional<std::string>& granularity, bool with_components, bool episodes_csv) {
    Context ctx = make_context(common, flip_files);
    if (!ctx.cfg.flip) throw UsageError("flip-eval needs flip.a / flip.b / flip.weight (via --flip or --config)");
    if (granularity) {
        try {
            ctx.cfg.flip->granularity = parse_granularity(*granularity);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (episodes) {
        if (*episodes < 1) throw UsageError("--episodes must be >= 1");
        ctx.cfg.flip_episodes = *episodes;
    }
    ctx.hash = config_hash(ctx.cfg);
    const FlipPolicy flip = *ctx.cfg.flip;

    PolicyRegistry registry;
    registry.add(policy_from_id(flip.policy_a, ctx));
    if (flip.policy_b != flip.policy_a) registry.add(policy_from_id(flip.policy_b, ctx));

    const auto& cfg = ctx.cfg;
    const long long n = cfg.flip_episodes;
    const auto flip_eps = evaluate_episodes(RolloutPolicy::flipped(flip), registry, n, cfg.env, cfg.planner,
                                            cfg.gamma_unsafe, ctx.seed, ctx.workers);
    std::vector<std::pair<std::string, McReport>> rows;
    rows.emplace_back("flip", summarize(RolloutPolicy::flipped(flip).label(), flip_eps, cfg.env, cfg.gamma_unsafe, ctx.seed));

    std::optional<PairedDiff> dv, dr;
    if (with_components) {
        const auto a = evaluate_episodes(RolloutPolicy::single(flip.policy_a), registry, n, cfg.env, cfg.planner,
                                         cfg.gamma_unsafe, ctx.seed, ctx.workers);
        const auto b = flip.policy_b == flip.policy_a
                           ? a
                           : evaluate_episodes(RolloutPolicy::single(flip.policy_b), registry, n, cfg.env,
                                               cfg.planner, cfg.gamma_unsafe, ctx.seed, ctx.workers);
        rows.emplace_back("component_a", summarize(flip.policy_a, a, cfg.env, cfg.gamma_unsafe, ctx.seed));
        rows.emplace_back("component_b", summarize(flip.policy_b, b, cfg.env, cfg.gamma_unsafe, ctx.seed));
        auto column = [](const std::vector<EpisodeSummary>& e, bool viol) {
            std::vector<double> v(e.size());
            for (std::size_t i = 0; i < e.size(); ++i) v[i] = viol ? (e[i].violated ? 1.0 : 0.0) : e[i].cum_reward;
            return v;
        };
        const std::vector<double> w{flip.weight, 1.0 - flip.weight};
        dv = paired_difference(column(flip_eps, true), {column(a, true), column(b, true)}, w);
        dr = paired_difference(column(flip_eps, false), {column(a, false), column(b, false)}, w);
    }

    const fs::path dir(ctx.out_dir);
    std::ostringstream csv;
    csv << manifest(ctx, "flip-eval");
    csv << "# granularity=" << to_string(flip.granularity) << " weight=" << format_double(flip.weight) << "\n";
    if (dv)
        csv << "# paired violation diff (flip - mixture of components)=" << format_double(dv->mean)
            << " stderr=" << format_double(dv->stderr_) << "\n"
            << "# paired reward diff (flip - mixture of components)=" << format_double(dr->mean)
            << " stderr=" << format_double(dr->stderr_) << "\n";
    csv << "role,";
    std::ostringstream header;
    write_report_header(header);
    std::string h = header.str();
    h.pop_back();
    csv << h << ",lp_alpha,lp_predicted_value\n";
    for (const auto& [role, r] : rows) {
        std::ostringstream row;
        write_report_row(row, r);
        std::string line = row.str();
        line.pop_back();
        csv << role << ',' << line << ',' << (cfg.flip_alpha ? format_double(*cfg.flip_alpha) : "") << ','
            << (cfg.flip_predicted_value ? format_double(*cfg.flip_predicted_value) : "") << '\n';
    }
    write_file(dir / "flip_eval.csv", csv.str());
    if (episodes_csv) {
        std::ostringstream ep;
        ep << manifest(ctx, "flip-eval");
        write_episode_csv(ep, flip_eps);
        write_file(dir / "flip_episodes.csv", ep.str());
    }
    const McReport& r = rows.front().second;
    std::cout << "flip-eval: violation_prob=" << format_double(r.violation_prob) << " ci=["
              << format_double(r.violation_ci.first) << "," << format_double(r.violation_ci.second)
              << "] mean_reward=" << format_double(r.mean_reward);
    if (cfg.flip_alpha) std::cout << " lp_alpha=" << format_double(*cfg.flip_alpha);
    if (cfg.flip_predicted_value) std::cout << " lp_value=" << format_double(*cfg.flip_predicted_value);
    std::cout << "\n";
    return kOk;
}

// ---------------------------------------------------------------- oracle

int cmd_oracle(const std::string& instance_path, std::optional<double> alpha, const std::string& constraint,
               double gamma) {
    tabular::Ccmdp mdp;
    {
        std::ifstream in(instance_path);
        if (!in) throw IoError("cannot open instance '" + instance_path + "'");
        try {
            mdp = tabular::parse_instance(in, instance_path);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    tabular::Constraint c;
    if (constraint == "joint")
        c.kind = tabular::ConstraintKind::Joint;
    else if (constraint == "ecsc")
        c.kind = tabular::ConstraintKind::Ecsc;
    else
        throw UsageError("--constraint must be joint or ecsc");
    c.alpha = alpha.value_or(mdp.alpha);
    c.gamma_unsafe = gamma;
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("--gamma must lie in (0, 1)");

    auto print_table = [](const tabular::PolicyTable& p) {
        std::string s;
        for (std::size_t i = 0; i < p.actions.size(); ++i) s += (i ? " " : "") + std::to_string(p.actions[i]);
        return s;
    };
    std::cout << "instance=" << instance_path << " constraint=" << constraint << " alpha=" << format_double(c.alpha)
              << " gamma_unsafe=" << format_double(gamma) << "\n";
    std::cout << "policies=" << tabular::policy_count(mdp) << "\n";
    std::cout << "unconstrained_optimum=" << format_double(tabular::value_iteration_optimum(mdp)) << "\n";
    bool any = false;
    try {
        const auto det = tabular::optimal_deterministic(mdp, c);
        std::cout << "deterministic_value=" << format_double(det.eval.j) << "\n"
                  << "deterministic_risk=" << format_double(c.risk(det.eval)) << "\n"
                  << "deterministic_policy=" << print_table(det.policy) << "\n";
        const auto rep = tabular::conservative_check(mdp, det.policy, gamma, c.alpha);
        std::cout << "deterministic_h_ecsc=" << format_double(rep.h_ecsc)
                  << " deterministic_marginal_sum=" << format_double(rep.marginal_sum)
                  << " deterministic_violation=" << format_double(rep.violation) << "\n";
        any = true;
    } catch (const tabular::NoFeasiblePolicy&) {
        std::cout << "deterministic_value=infeasible\n";
    }
    try {
        const auto mix = tabular::optimal_mixture(mdp, c);
        std::cout << "mixture_value=" << format_double(mix.value) << "\n"
                  << "mixture_risk=" << format_double(mix.lp.risk) << "\n"
                  << "mixture_support=" << mix.lp.support.size() << "\n";
        for (std::size_t i = 0; i < mix.lp.support.size(); ++i)
            std::cout << "mixture_member=" << i << " weight=" << format_double(mix.lp.support[i].weight)
                      << " value=" << format_double(mix.evals[i].j) << " risk=" << format_double(c.risk(mix.evals[i]))
                      << " policy=" << print_table(mix.policies[i]) << "\n";
        any = true;
    } catch (const Infeasible&) {
        std::cout << "mixture_value=infeasible\n";
    }
    if (!any) throw AllInfeasible("no policy or mixture meets the constraint");
    return kOk;
}

// ---------------------------------------------------------------- bound

int cmd_bound(std::optional<long long> n, std::optional<double> alpha_s, std::optional<double> alpha_tilde,
              std::optional<double> gap, double gamma, std::optional<double> delta) {
    try {
        if (delta) {
            double g = 0.0;
            if (gap)
                g = *gap;
            else if (alpha_s && alpha_tilde)
                g = *alpha_s - *alpha_tilde;
            else
                throw UsageError("bound --delta needs --gap or --alpha-s with --alpha-tilde");
            const auto need = required_samples(*delta, g, gamma);
            std::cout << "delta=" << format_double(*delta) << " gap=" << format_double(g)
                      << " gamma_unsafe=" << format_double(gamma) << " required_samples=" << need << "\n";
            return kOk;
        }
        if (!n) throw UsageError("bound needs --n (or --delta)");
        HoeffdingQuery q;
        q.n = *n;
        q.gamma_unsafe = gamma;
        if (alpha_s && alpha_tilde) {
            q.alpha_s = *alpha_s;
            q.alpha_tilde_s = *alpha_tilde;
        } else if (gap && (alpha_s || alpha_tilde)) {
            q.alpha_s = alpha_s ? *alpha_s : *alpha_tilde + *gap;
            q.alpha_tilde_s = alpha_s ? *alpha_s - *gap : *alpha_tilde;
        } else if (gap) {
            // only the gap enters the formula; anchor the tightened level at 0
            q.alpha_tilde_s = 0.0;
            q.alpha_s = *gap;
        } else {
            throw UsageError("bound needs --gap or --alpha-s with --alpha-tilde");
        }
        const BoundValue b = hoeffding_failure_bound(q);
        std::cout << "n=" << q.n << " alpha_s=" << format_double(q.alpha_s)
                  << " alpha_tilde_s=" << format_double(q.alpha_tilde_s) << " gamma_unsafe=" << format_double(gamma)
                  << " bound=" << format_double(b.value) << " underflow=" << (b.underflow ? 1 : 0) << "\n";
        return kOk;
    } catch (const std::domain_error& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------- plot

int cmd_plot(const Common& common, std::string frontier_path) {
    Context ctx = make_context(common);
    if (frontier_path.empty()) frontier_path = (fs::path(ctx.out_dir) / "frontier.csv").string();
    const auto points = load_frontier(frontier_path);
    if (points.empty()) throw AllInfeasible("frontier '" + frontier_path + "' has no points");

    plot::Series pts{"deterministic policies", {}, {}, false, "#1f77b4"};
    plot::Series env{"flip (concave envelope)", {}, {}, true, "#d62728"};
    for (const auto& p : points) pts.x.push_back(p.alpha_hat), pts.y.push_back(p.j_hat);
    const auto rr = risk_reward(points);
    for (const auto& v : concave_envelope(rr)) env.x.push_back(v.risk), env.y.push_back(v.value);
    const std::string a = plot::render_svg({"Reward vs violation probability", "violation probability",
                                            "mean cumulative reward", {env, pts}});

    plot::Series scatter{"sweep policies", {}, {}, false, "#2ca02c"};
    for (const auto& p : points) scatter.x.push_back(p.report.discounted_unsafe), scatter.y.push_back(p.alpha_hat);
    const std::string b = plot::render_svg(
        {"Violation probability vs discounted unsafety", "discounted unsafety", "violation probability", {scatter}});

    const fs::path dir(ctx.out_dir);
    // SVG comments carry the same manifest as the CSVs.
    const std::string m = manifest(ctx, "plot");
    const std::string comment = "<!-- " + m.substr(2, m.size() - 3) + " -->\n";
    write_file(dir / "frontier.svg", comment + a);
    write_file(dir / "unsafe_vs_violation.svg", comment + b);
    std::cout << "plot: wrote " << (dir / "frontier.svg").string() << " and "
              << (dir / "unsafe_vs_violation.svg").string() << "\n";
    return kOk;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App cli{"Chance-constrained flipping-policy toolkit"};
    cli.require_subcommand(1);
    cli.set_version_flag("--version", kVersion);

    Common common;

    auto* sweep = cli.add_subcommand("sweep", "evaluate one deterministic policy per beta and write the frontier");
    add_common(sweep, common);
    std::optional<std::string> betas;
    std::optional<long long> sweep_episodes;
    bool save_datasets = false;
    sweep->add_option("--betas", betas, "comma-separated beta list (overrides sweep.betas)");
    sweep->add_option("--episodes", sweep_episodes, "episodes per beta (overrides sweep.n_episodes)");
    sweep->add_flag("--save-datasets", save_datasets, "also write the nearest-neighbor datasets");

    auto* lp = cli.add_subcommand("lp", "solve the mixture LP on a frontier CSV");
    add_common(lp, common);
    std::string lp_frontier;
    std::optional<std::string> lp_alphas;
    lp->add_option("--frontier", lp_frontier, "frontier CSV (default <out>/frontier.csv)");
    lp->add_option("--alpha", lp_alphas, "comma-separated violation limits (overrides lp.alphas)");

    auto* flip_eval = cli.add_subcommand("flip-eval", "Monte Carlo evaluation of a flip policy");
    add_common(flip_eval, common);
    std::vector<std::string> flip_files;
    std::optional<long long> flip_episodes;
    std::optional<std::string> granularity;
    bool no_components = false, episodes_csv = false;
    flip_eval->add_option("--flip", flip_files, "flip settings file, e.g. written by `lp`");
    flip_eval->add_option("--episodes", flip_episodes, "episodes (overrides flip.n_episodes)");
    flip_eval->add_option("--granularity", granularity, "per_episode or per_step");
    flip_eval->add_flag("--no-components", no_components, "skip evaluating the two component policies");
    flip_eval->add_flag("--episodes-csv", episodes_csv, "also write per-episode rows");

    auto* oracle = cli.add_subcommand("oracle", "exact optimum of a tabular instance by enumeration");
    std::string instance;
    std::optional<double> oracle_alpha;
    std::string constraint = "joint";
    double oracle_gamma = 0.995;
    oracle->add_option("--instance", instance, "instance file")->required();
    oracle->add_option("--alpha", oracle_alpha, "risk limit (default: the instance's alpha)");
    oracle->add_option("--constraint", constraint, "joint or ecsc");
    oracle->add_option("--gamma", oracle_gamma, "discount of the unsafety sum");

    auto* bound = cli.add_subcommand("bound", "finite-sample feasibility bound calculator");
    std::optional<long long> bound_n;
    std::optional<double> alpha_s, alpha_tilde, gap, delta;
    double bound_gamma = 0.995;
    bound->add_option("--n", bound_n, "sample count");
    bound->add_option("--alpha-s", alpha_s, "probability level");
    bound->add_option("--alpha-tilde", alpha_tilde, "tightened sample level");
    bound->add_option("--gap", gap, "alpha_s - alpha_tilde");
    bound->add_option("--gamma", bound_gamma, "discount of the unsafety sum");
    bound->add_option("--delta", delta, "print the samples needed for this failure probability instead");

    auto* plot_cmd = cli.add_subcommand("plot", "render frontier and unsafety plots as SVG");
    add_common(plot_cmd, common);
    std::string plot_frontier;
    plot_cmd->add_option("--frontier", plot_frontier, "frontier CSV (default <out>/frontier.csv)");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*sweep) return cmd_sweep(common, betas, sweep_episodes, save_datasets);
        if (*lp) return cmd_lp(common, lp_frontier, lp_alphas);
        if (*flip_eval)
            return cmd_flip_eval(common, flip_files, flip_episodes, granularity, !no_components, episodes_csv);
        if (*oracle) return cmd_oracle(instance, oracle_alpha, constraint, oracle_gamma);
        if (*bound) return cmd_bound(bound_n, alpha_s, alpha_tilde, gap, bound_gamma, delta);
        if (*plot_cmd) return cmd_plot(common, plot_frontier);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const AllInfeasible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace flipchance::app
