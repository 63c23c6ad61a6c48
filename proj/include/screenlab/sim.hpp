// Monte Carlo engine: runs agents through a mechanism, estimates payoffs,
// and searches for incentive/participation violations behaviorally.
//
// Randomness is counter-based: every draw is a pure function of
// (seed, path index, draw counter), so results are bit-identical regardless
// of thread count or execution order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "screenlab/mechanism.hpp"
#include "screenlab/stochastic.hpp"

namespace screenlab {

namespace rng {

inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// One independent stream per (seed, stream id); draws indexed by a counter.
struct Counter {
    std::uint64_t key;

    Counter(std::uint64_t seed, std::uint64_t stream) : key(mix(seed ^ mix(stream))) {}

    double u01(std::uint64_t counter) const {
        const std::uint64_t v = mix(key + 0x632be59bd9b4e019ULL * counter);
        return static_cast<double>(v >> 11) * 0x1.0p-53;
    }
};

}  // namespace rng

struct SimConfig {
    std::uint64_t n_paths = 100000;
    std::uint64_t seed = 1;
    int deviation_nodes = 200;
    int theta_grid = 7;
    int threads = 0;  // 0: hardware concurrency

    void validate() const {
        if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
    }
};

struct SimResult {
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    double mean_principal = 0.0;
    double stderr_principal = 0.0;
    double mean_agent = 0.0;
    double stderr_agent = 0.0;
    std::vector<double> start_frequency;  // index 0 = never started, then periods 1..N
    std::vector<std::pair<double, double>> agent_quantiles;  // (prob, ex-post agent payoff)
    double agent_negative_share = 0.0;  // ex-post payoff below zero is allowed, just visible
};

namespace detail {

inline constexpr double kQuantileProbes[] = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

inline void run_parallel(std::uint64_t n, int threads, const std::function<void(std::uint64_t)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, threads);
    if (threads == 1 || n < 1024) {
        for (std::uint64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::uint64_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            for (std::uint64_t i = b; i < e; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline SimResult summarize(std::uint64_t n, std::uint64_t seed, std::vector<double>& principal,
                           std::vector<double>& agent, std::vector<std::uint32_t>& start, int N) {
    SimResult res;
    res.n_paths = n;
    res.seed = seed;
    const MeanStderr mp = mean_stderr(principal);
    const MeanStderr ma = mean_stderr(agent);
    res.mean_principal = mp.mean;
    res.stderr_principal = mp.stderr_;
    res.mean_agent = ma.mean;
    res.stderr_agent = ma.stderr_;
    res.start_frequency.assign(N + 1, 0.0);
    for (std::uint32_t s : start) res.start_frequency[s] += 1.0;
    for (double& f : res.start_frequency) f /= static_cast<double>(n);
    std::vector<double> sorted = agent;
    std::sort(sorted.begin(), sorted.end());
    for (double p : kQuantileProbes) {
        const auto idx = static_cast<std::size_t>(p * (n - 1));
        res.agent_quantiles.emplace_back(p, sorted[idx]);
    }
    std::size_t neg = 0;
    for (double x : agent) neg += (x < 0.0) ? 1 : 0;
    res.agent_negative_share = static_cast<double>(neg) / static_cast<double>(n);
    return res;
}

}  // namespace detail

// Draw i.i.d. cost paths, apply the threshold actions (tie counts as work),
// pay per the mechanism's final-payment rule.
inline SimResult simulate(const Mechanism& mech, const Environment& env, const SimConfig& cfg) {
    cfg.validate();
    mech.verify_cache(env.dist);
    const int N = mech.periods();
    std::vector<double> principal(cfg.n_paths), agent(cfg.n_paths);
    std::vector<std::uint32_t> start(cfg.n_paths, 0);

    detail::run_parallel(cfg.n_paths, cfg.threads, [&](std::uint64_t i) {
        const rng::Counter rc(cfg.seed, i);
        WorkHistory w;
        double cost = 0.0;
        int work = 0;
        std::uint32_t started = 0;
        for (int t = 1; t <= N; ++t) {
            const double theta = env.dist.quantile(rc.u01(t - 1));
            const bool x = theta <= mech.profile().cutoff(w);
            if (x) {
                cost += theta;
                ++work;
                if (started == 0) started = static_cast<std::uint32_t>(t);
            }
            w = w.append(x);
        }
        const double p = mech.final_payment(env.dist, w);
        principal[i] = env.alpha * work - p;
        agent[i] = p - cost;
        start[i] = started;
    });
    return detail::summarize(cfg.n_paths, cfg.seed, principal, agent, start, N);
}

struct DeviationSearchResult {
    double max_violation = -std::numeric_limits<double>::infinity();
    std::string worst;
    int nodes_checked = 0;
};

namespace detail {

// Value of "deviate once more at a fixed later period t2 (forced action b),
// truthful elsewhere", from node v onward, via the gross-continuation table.
inline double double_dev_value(const Mechanism& mech, const CostDistribution& d,
                               const std::vector<double>& W, const WorkHistory& v, int t2, int b) {
    const int N = mech.periods();
    if (v.length == N) return mech.final_payment(d, v);
    const double c = mech.profile().cutoff(v);
    const double F = d.cdf(c);
    if (v.length + 1 == t2) {
        if (b == 0 && c >= d.hi())  // no report above the cutoff: stay truthful
            return W[ThresholdProfile::index(v)];
        const double cur = (b == 1) ? -d.mean() : 0.0;
        return cur + W[ThresholdProfile::index(v.append(b == 1))];
    }
    const double work_cost = c * F - d.cdf_integral(c);
    double val = -work_cost;
    if (F > 0.0) val += F * double_dev_value(mech, d, W, v.append(true), t2, b);
    if (F < 1.0) val += (1.0 - F) * double_dev_value(mech, d, W, v.append(false), t2, b);
    // zero-probability children never contribute
    return val;
}

}  // namespace detail

// Behavioral IC check: sample on-path nodes, try the opposite-side one-shot
// report and all "lie now, lie once later" pairs, by exact continuation
// arithmetic. Returns the largest truth-shortfall found.
inline DeviationSearchResult deviation_search(const Mechanism& mech, const Environment& env,
                                              const SimConfig& cfg) {
    mech.verify_cache(env.dist);
    const int N = mech.periods();
    const CostDistribution& d = env.dist;
    std::vector<double> W;
    detail::fill_gross_continuation(mech, d, W);

    DeviationSearchResult res;
    const rng::Counter rc(cfg.seed, 0x9d37f00dULL);

    for (int node_i = 0; node_i < cfg.deviation_nodes; ++node_i) {
        // draw a reachable on-path node: walk truthfully to a random depth
        const std::uint64_t base = static_cast<std::uint64_t>(node_i) * (N + 2);
        const int t = 1 + static_cast<int>(rc.u01(base) * N);
        WorkHistory w;
        for (int k = 1; k < t; ++k) {
            const double theta = d.quantile(rc.u01(base + k));
            w = w.append(theta <= mech.profile().cutoff(w));
        }
        const double c = mech.profile().cutoff(w);
        std::vector<double> thetas = {d.hi(), d.lo(), c,
                                      std::min(c + 1e-6 * d.support().width(), d.hi()),
                                      std::max(c - 1e-6 * d.support().width(), d.lo())};
        for (int g = 0; g < cfg.theta_grid; ++g)
            thetas.push_back(d.quantile(rc.u01(base + N + 1) * 0.5 +
                                        0.5 * static_cast<double>(g) / std::max(1, cfg.theta_grid)));

        for (double theta : thetas) {
            const bool truth_work = theta <= c;
            const double truth = (truth_work ? -theta : 0.0) +
                                 W[ThresholdProfile::index(w.append(truth_work))];
            auto record = [&](double dev, const std::string& what) {
                const double gain = dev - truth;
                if (gain > res.max_violation) {
                    res.max_violation = gain;
                    res.worst = what + " at t=" + std::to_string(t) + " w=\"" + w.str() + "\"";
                }
            };
            // one-shot opposite report
            const bool dev_work = !truth_work;
            if (dev_work || c < d.hi()) {
                const double dev = (dev_work ? -theta : 0.0) +
                                   W[ThresholdProfile::index(w.append(dev_work))];
                record(dev, dev_work ? "one-shot to work" : "one-shot to shirk");
            }
            // lie now (both sides), lie once later
            for (int first : {0, 1}) {
                if (first == 0 && c >= d.hi()) continue;
                const double cur = (first == 1) ? -theta : 0.0;
                const WorkHistory v = w.append(first == 1);
                for (int t2 = t + 1; t2 <= N; ++t2)
                    for (int b : {0, 1})
                        record(cur + detail::double_dev_value(mech, d, W, v, t2, b),
                               "double deviation (" + std::to_string(first) + "," +
                                   std::to_string(b) + ") later t2=" + std::to_string(t2));
            }
        }
        ++res.nodes_checked;
    }
    return res;
}

struct QuitSearchResult {
    double min_continuation = std::numeric_limits<double>::infinity();
    std::string worst;
};

// Minimum interim continuation utility over the worst-case nodes plus random
// sampled (node, theta) pairs. Agrees with check_interim_ir's minimum slack.
inline QuitSearchResult quit_search(const Mechanism& mech, const Environment& env,
                                    const SimConfig& cfg) {
    const IrReport ir = check_interim_ir(mech, env);
    QuitSearchResult res;
    res.min_continuation = ir.min_slack;
    res.worst = "worst-case node t=" + std::to_string(ir.argmin_t) + " w=\"" +
                ir.argmin_w.str() + "\" theta=thetabar";

    const CostDistribution& d = env.dist;
    std::vector<double> W;
    detail::fill_gross_continuation(mech, d, W);
    const rng::Counter rc(cfg.seed, 0x0011c0deULL);
    const int N = mech.periods();
    for (int s = 0; s < cfg.deviation_nodes; ++s) {
        const std::uint64_t base = static_cast<std::uint64_t>(s) * (N + 2);
        const int t = 1 + static_cast<int>(rc.u01(base) * N);
        WorkHistory w;
        for (int k = 1; k < t; ++k)
            w = w.append(d.quantile(rc.u01(base + k)) <= mech.profile().cutoff(w));
        const double theta = d.quantile(rc.u01(base + N + 1));
        const bool work = theta <= mech.profile().cutoff(w);
        const double u = (work ? -theta : 0.0) + W[ThresholdProfile::index(w.append(work))];
        if (u < res.min_continuation) {
            res.min_continuation = u;
            res.worst = "sampled node t=" + std::to_string(t) + " w=\"" + w.str() + "\"";
        }
    }
    return res;
}

struct StochasticSimResult {
    SimResult stochastic;
    double gain_mean = 0.0;  // paired stochastic-minus-deterministic payoff
    double gain_stderr = 0.0;
    double shirk_branch_frequency = 0.0;
};

// Randomizes the period-1 recommendation with probability q1(theta1) and
// replays the same cost paths through the deterministic base, so the gain
// estimate is paired.
inline StochasticSimResult simulate_stochastic(const StochasticMechanism& sm,
                                               const Environment& env, const SimConfig& cfg) {
    cfg.validate();
    const int N = env.periods;
    const CostDistribution& d = env.dist;
    const double E = d.mean();
    std::vector<double> principal(cfg.n_paths), agent(cfg.n_paths), gain(cfg.n_paths);
    std::vector<std::uint32_t> start(cfg.n_paths, 0);
    std::vector<std::uint8_t> shirk_branch(cfg.n_paths, 0);

    detail::run_parallel(cfg.n_paths, cfg.threads, [&](std::uint64_t i) {
        const rng::Counter rc(cfg.seed, i);
        std::vector<double> theta(N);
        for (int t = 0; t < N; ++t) theta[t] = d.quantile(rc.u01(t));

        // deterministic base on the same costs
        WorkHistory wb;
        double cost_b = 0.0;
        int work_b = 0;
        for (int t = 0; t < N; ++t) {
            const bool x = theta[t] <= sm.base.profile().cutoff(wb);
            if (x) {
                cost_b += theta[t];
                ++work_b;
            }
            wb = wb.append(x);
        }
        const double base_principal =
            env.alpha * work_b - sm.base.final_payment(d, wb);

        double p, cost;
        int work;
        std::uint32_t started;
        if (theta[0] > sm.c1_star) {
            // identical to the base mechanism on this segment
            p = sm.base.final_payment(d, wb);
            cost = cost_b;
            work = work_b;
            started = 0;
            for (int t = 0; t < N; ++t)
                if (wb.worked(t)) {
                    started = static_cast<std::uint32_t>(t + 1);
                    break;
                }
        } else {
            const double q = sm.q1(theta[0]);
            const bool rec_work = rc.u01(N) < q;  // dedicated counter for the randomization
            cost = 0.0;
            for (int t = 1; t < N; ++t) cost += theta[t];  // sure work from period 2 on
            if (rec_work) {
                p = (theta[0] < sm.x_sb) ? sm.payment_sure_work(theta[0], E, N)
                                         : sm.payment_work_branch(theta[0], E, N);
                cost += theta[0];
                work = N;
                started = 1;
            } else {
                p = sm.payment_shirk_branch(theta[0], E, N);
                work = N - 1;
                started = 2;
                shirk_branch[i] = 1;
            }
        }
        principal[i] = env.alpha * work - p;
        agent[i] = p - cost;
        start[i] = started;
        gain[i] = principal[i] - base_principal;
    });

    StochasticSimResult out;
    out.stochastic = detail::summarize(cfg.n_paths, cfg.seed, principal, agent, start, N);
    const MeanStderr g = mean_stderr(gain);
    out.gain_mean = g.mean;
    out.gain_stderr = g.stderr_;
    std::size_t sb = 0;
    for (auto b : shirk_branch) sb += b;
    out.shirk_branch_frequency = static_cast<double>(sb) / static_cast<double>(cfg.n_paths);
    return out;
}

}  // namespace screenlab
