// screenlab: solve/verify the limited-liability dynamic screening model.
//
//   screenlab <solve|sweep|alpha-hat|oracle|simulate|improve|check>
//             --config <path> [--out <dir>]
//
// Exit codes: 0 success, 2 infeasibility/refusal/guard, 64 usage or malformed
// config, 1 internal error or failed check.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "screenlab/screenlab.hpp"

namespace fs = std::filesystem;
using namespace screenlab;

namespace {

struct CliContext {
    RunConfig cfg;
    fs::path out_dir;
    int threads = 0;
};

int resolve_threads(const RunConfig& cfg) {
    if (const char* env = std::getenv("SCREENLAB_THREADS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
            throw ConfigError("SCREENLAB_THREADS is not an integer");
        }
    }
    return static_cast<int>(cfg.get_int("run.threads", 0));
}

CliContext load_context(const std::string& config_path, const std::string& out_dir) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    CliContext ctx{RunConfig::parse(ss.str()), fs::path(out_dir), 0};
    ctx.threads = resolve_threads(ctx.cfg);
    fs::create_directories(ctx.out_dir);
    return ctx;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void write_json(const fs::path& path, const ordered_json& j) {
    write_file(path, j.dump(2) + "\n");
}

SimConfig sim_config(const CliContext& ctx) {
    SimConfig sc;
    sc.n_paths = static_cast<std::uint64_t>(ctx.cfg.get_int("sim.n_paths", 100000));
    sc.seed = static_cast<std::uint64_t>(ctx.cfg.get_int("sim.seed", 1));
    sc.deviation_nodes = static_cast<int>(ctx.cfg.get_int("sim.deviation_nodes", 200));
    sc.theta_grid = static_cast<int>(ctx.cfg.get_int("sim.theta_grid", 7));
    sc.threads = ctx.threads;
    return sc;
}

void warn_if_assumptions_fail(const CostDistribution& d, int N) {
    if (N >= 2) {
        const AssumptionReport rep = check_assumption2(d, N);
        if (!rep.a2_g_monotone)
            std::cerr << "warning: virtual cost G is not monotone on the check grid; "
                         "first-order solutions may be unreliable\n";
    }
}

int cmd_solve(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const Environment env(d, ctx.cfg.periods(), ctx.cfg.get_double("problem.alpha"));
    warn_if_assumptions_fail(d, env.periods);
    const SolveReport rep = solve(env);
    write_json(ctx.out_dir / "solve.json", solve_report_to_json(rep));
    std::cout << "regime " << regime_name(rep.regime) << "  V* " << round_trip(rep.v_star)
              << "  V_aw " << round_trip(rep.v_aw) << "\n";
    return 0;
}

int cmd_sweep(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const int N = ctx.cfg.periods();
    const auto rows = sweep_alpha(d, N, ctx.cfg.alpha_grid());
    write_file(ctx.out_dir / "sweep.csv", sweep_to_csv(rows, N));
    std::cout << "wrote " << rows.size() << " rows to " << (ctx.out_dir / "sweep.csv").string()
              << "\n";
    return 0;
}

int cmd_alpha_hat(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const int N = ctx.cfg.periods();
    const AlphaHatResult res = find_alpha_hat(d, N);
    write_json(ctx.out_dir / "alpha_hat.json", alpha_hat_to_json(res));
    std::cout << round_trip(res.alpha_hat) << "\n";
    return 0;
}

int cmd_oracle(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const Environment env(d, ctx.cfg.periods(), ctx.cfg.get_double("problem.alpha"));
    const int grid = static_cast<int>(ctx.cfg.get_int("oracle.grid_points", 201));
    const int rounds = static_cast<int>(ctx.cfg.get_int("oracle.refine_rounds", 3));
    const BruteForceResult res = brute_force(env, grid, rounds, ctx.threads);
    ordered_json j = profile_to_json(res.profile);
    j["value"] = res.value;
    j["final_step"] = res.final_step;
    write_json(ctx.out_dir / "oracle.json", j);
    std::cout << "oracle V " << round_trip(res.value) << "\n";
    return 0;
}

int cmd_simulate(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const Environment env(d, ctx.cfg.periods(), ctx.cfg.get_double("problem.alpha"));
    const SolveReport rep = solve(env);
    const Mechanism mech = rep.menu ? Mechanism::menu_binding(rep.menu->expand(d), d)
                                    : always_working(env).first;
    const SimConfig sc = sim_config(ctx);
    const SimResult sim = simulate(mech, env, sc);
    const DeviationSearchResult dev = deviation_search(mech, env, sc);
    const QuitSearchResult quit = quit_search(mech, env, sc);

    ordered_json j = sim_result_to_json(sim);
    j["exact_principal_payoff"] = principal_payoff(mech, env);
    j["max_ic_violation"] = dev.max_violation;
    j["ic_worst"] = dev.worst;
    j["min_interim_continuation"] = quit.min_continuation;
    j["quit_worst"] = quit.worst;
    write_json(ctx.out_dir / "simulate.json", j);

    if (ctx.cfg.get_bool("sim.per_path_csv", false)) {
        std::string csv = "path,principal,agent,start_period\n";
        // re-run single-threaded for the dump; counters make it bit-identical
        const int N = mech.periods();
        for (std::uint64_t i = 0; i < sc.n_paths; ++i) {
            const rng::Counter rc(sc.seed, i);
            WorkHistory w;
            double cost = 0.0;
            int work = 0;
            std::uint32_t started = 0;
            for (int t = 1; t <= N; ++t) {
                const double theta = d.quantile(rc.u01(t - 1));
                const bool x = theta <= mech.profile().cutoff(w);
                if (x) {
                    cost += theta;
                    ++work;
                    if (!started) started = t;
                }
                w = w.append(x);
            }
            const double p = mech.final_payment(d, w);
            csv += std::to_string(i) + "," + round_trip(env.alpha * work - p) + "," +
                   round_trip(p - cost) + "," + std::to_string(started) + "\n";
        }
        write_file(ctx.out_dir / "paths.csv", csv);
    }
    std::cout << "empirical " << round_trip(sim.mean_principal) << " +- "
              << round_trip(sim.stderr_principal) << "\n";
    return 0;
}

int cmd_improve(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const Environment env(d, ctx.cfg.periods(), ctx.cfg.get_double("problem.alpha"));
    const SolveReport rep = solve(env);
    if (rep.regime != Regime::ConsecutiveMenu)
        throw RefusalError("improve: optimal mechanism is always-working; no stochastic "
                           "improvement applies");
    const double eps_upper = rep.u1_star / (d.hi() - d.mean());
    double eps;
    if (ctx.cfg.has("improve.epsilon"))
        eps = ctx.cfg.get_double("improve.epsilon");
    else
        eps = eps_upper * ctx.cfg.get_double("improve.epsilon_frac", 0.5);
    const StochasticMechanism sm = build_improvement(rep, env, eps);
    const double delta = improvement_delta(rep, env, eps);
    const double v_st = stochastic_payoff(sm, env);
    const StochasticCheck chk = verify_stochastic(sm, env);
    const StochasticSimResult ssim = simulate_stochastic(sm, env, sim_config(ctx));

    ordered_json j{{"epsilon", eps},
                   {"epsilon_upper", eps_upper},
                   {"x_sb", sm.x_sb},
                   {"c1_star", sm.c1_star},
                   {"delta", delta},
                   {"slack_min", chk.min_slack},
                   {"base_V", rep.v_star},
                   {"stochastic_V", v_st},
                   {"identity_gap", v_st - rep.v_star - delta},
                   {"envelope_max_err", chk.envelope_max_err},
                   {"sim_gain", ssim.gain_mean},
                   {"sim_gain_stderr", ssim.gain_stderr},
                   {"shirk_branch_frequency", ssim.shirk_branch_frequency}};
    write_json(ctx.out_dir / "improve.json", j);
    std::cout << "delta " << round_trip(delta) << "  (exact gap "
              << round_trip(v_st - rep.v_star) << ")\n";
    return 0;
}

int cmd_check(const CliContext& ctx) {
    const CostDistribution d = ctx.cfg.dist();
    const int N = ctx.cfg.periods();
    bool all_ok = true;
    ordered_json checks = ordered_json::array();
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        all_ok = all_ok && ok;
        checks.push_back(ordered_json{{"name", name}, {"pass", ok}, {"detail", detail}});
        std::cout << "CHECK " << name << ": " << (ok ? "PASS" : "FAIL") << "  " << detail << "\n";
    };

    report("assumption1", true, check_assumption1(d) ? "holds" : "fails (reported, not fatal)");
    if (N >= 2) {
        const AssumptionReport rep = check_assumption2(d, N);
        report("assumption2", rep.a2_g_monotone,  // density bound is informative, not fatal
               rep.details + (rep.a2_density_bound ? " [density bound holds]"
                                                   : " [density bound fails]"));
    }

    {  // I(x) against direct quadrature of F
        double max_err = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double x = d.lo() + d.support().width() * k / 21.0;
            const double direct = integrate([&](double t) { return d.cdf(t); }, d.lo(), x, 1e-12);
            max_err = std::max(max_err, std::abs(direct - d.cdf_integral(x)));
        }
        report("cdf_integral_quadrature", max_err <= 1e-9, "max |I - quad| = " + round_trip(max_err));
        const double parts = std::abs(d.cdf_integral(d.hi()) - (d.hi() - d.mean()));
        report("integration_by_parts", parts <= 1e-9, "|I(hi) - (hi-mean)| = " + round_trip(parts));
        const double y = 0.5 * (virtual_cost(d, d.lo()) + virtual_cost(d, d.hi()));
        const double rt = std::abs(virtual_cost(d, virtual_cost_inverse(d, y)) - y);
        report("virtual_cost_roundtrip", rt <= 1e-10, "|G(Ginv(y)) - y| = " + round_trip(rt));
    }

    {  // leaf probabilities of a pseudo-random profile sum to one
        std::vector<double> cutoffs(ThresholdProfile::node_count(std::min(N, 6)));
        const rng::Counter rc(7, 7);
        for (std::size_t i = 0; i < cutoffs.size(); ++i)
            cutoffs[i] = d.lo() + d.support().width() * rc.u01(i);
        const ThresholdProfile p(std::min(N, 6), cutoffs, d.support());
        double sum = 0.0;
        for (const WorkHistory& w : histories_of_length(p.periods(), p.periods()))
            sum += path_probability(p, d, w);
        report("leaf_probability_sum", std::abs(sum - 1.0) <= 1e-12,
               "|sum - 1| = " + round_trip(std::abs(sum - 1.0)));
    }

    if (ctx.cfg.has("problem.alpha")) {
        const Environment env(d, N, ctx.cfg.get_double("problem.alpha"));
        const SolveReport rep = solve(env);
        const Mechanism mech = rep.menu ? Mechanism::menu_binding(rep.menu->expand(d), d)
                                        : always_working(env).first;
        report("interim_ir", rep.ir_min_slack >= -kSlackTol,
               "min slack = " + round_trip(rep.ir_min_slack));

        double min_leaf = std::numeric_limits<double>::infinity();
        for (const WorkHistory& w : histories_of_length(N, N))
            if (path_probability(mech.profile(), d, w) > 0.0)
                min_leaf = std::min(min_leaf, mech.final_payment(d, w));
        report("limited_liability", min_leaf >= -1e-10,
               "min on-path leaf payment = " + round_trip(min_leaf));

        const SimConfig sc = sim_config(ctx);
        const DeviationSearchResult dev = deviation_search(mech, env, sc);
        report("incentive_compatibility", dev.max_violation <= kSlackTol,
               "max violation = " + round_trip(dev.max_violation));

        if (rep.regime == Regime::ConsecutiveMenu) {
            const double eps = 0.5 * rep.u1_star / (d.hi() - d.mean());
            const StochasticMechanism sm = build_improvement(rep, env, eps);
            const double gap =
                std::abs(stochastic_payoff(sm, env) - rep.v_star - improvement_delta(rep, env, eps));
            report("stochastic_delta_identity", gap <= 1e-10, "|gap| = " + round_trip(gap));
            report("stochastic_ir", verify_stochastic(sm, env).ok, "periodic ex-post IR sweep");
        }
    }

    write_json(ctx.out_dir / "check.json", ordered_json{{"all_pass", all_ok}, {"checks", checks}});
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic screening solver/verifier"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    for (const char* name : {"solve", "sweep", "alpha-hat", "oracle", "simulate", "improve",
                             "check"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (default: .)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        const CliContext ctx = load_context(config_path, out_dir);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "solve") return cmd_solve(ctx);
        if (cmd == "sweep") return cmd_sweep(ctx);
        if (cmd == "alpha-hat") return cmd_alpha_hat(ctx);
        if (cmd == "oracle") return cmd_oracle(ctx);
        if (cmd == "simulate") return cmd_simulate(ctx);
        if (cmd == "improve") return cmd_improve(ctx);
        if (cmd == "check") return cmd_check(ctx);
        std::cerr << "unknown command\n";
        return 64;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 64;
    } catch (const RefusalError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
