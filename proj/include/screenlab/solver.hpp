// Optimal-mechanism computation: the always-working benchmark, the damped
// Newton solve of the consecutive-menu first-order system, feasibility of the
// relaxed solution, regime selection, the regime-switch point, alpha sweeps,
// and the structure-free brute-force oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "screenlab/mechanism.hpp"

namespace screenlab {

// Precondition failures the operator is expected to hit (exit code 2 at the
// CLI): alpha below thetabar for solve, oracle horizon too large, ...
struct RefusalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kFocTol = 1e-10;
inline constexpr double kDegenerateEps = 1e-8;  // c1 within this of thetabar => always-working

// Start cutoffs c_t(0), t = 1..N. Expands to a full profile with cutoff
// thetabar on every started history.
struct ConsecMenu {
    std::vector<double> start_cutoffs;

    int periods() const { return static_cast<int>(start_cutoffs.size()); }

    ThresholdProfile expand(const CostDistribution& d) const {
        const int N = periods();
        ThresholdProfile p = ThresholdProfile::constant(N, d.hi(), d.support());
        for (int t = 1; t <= N; ++t) p.cutoff(WorkHistory::all_shirk(t - 1)) = start_cutoffs[t - 1];
        return p;
    }
};

namespace detail {

// Chain continuation values of a consecutive menu. vhat0[m] = V-hat at the
// all-shirk node of length m (m = 0..N), u1 = sum_{t>=2} I(c_t(0)).
struct MenuChain {
    std::vector<double> F, I, vhat0;
    double u1 = 0.0;
};

inline MenuChain menu_chain(const std::vector<double>& c, const Environment& env) {
    const int N = static_cast<int>(c.size());
    const CostDistribution& d = env.dist;
    MenuChain ch;
    ch.F.resize(N);
    ch.I.resize(N);
    for (int t = 0; t < N; ++t) {
        ch.F[t] = d.cdf(c[t]);
        ch.I[t] = d.cdf_integral(c[t]);
    }
    for (int t = 1; t < N; ++t) ch.u1 += ch.I[t];
    const double E = d.mean();
    ch.vhat0.assign(N + 1, 0.0);
    double T = 0.0, P = ch.u1;
    ch.vhat0[N] = env.alpha * T - P;
    for (int m = N - 1; m >= 0; --m) {
        const double Fm = ch.F[m];  // cutoff applied in period m+1
        T = Fm * (N - m) + (1.0 - Fm) * T;
        P = Fm * c[m] - ch.I[m] + Fm * ((N - m - 1) * E + ch.u1) + (1.0 - Fm) * P;
        ch.vhat0[m] = env.alpha * T - P;
    }
    return ch;
}

// First-order system for the start cutoffs. Row t (1-based):
//   Pr(0_{t-1}) (alpha - c_t + Vhat(0_{t-1},1) - Vhat(0_{t-1},0)) - F(c_t)/f(c_t),
// with Vhat(0_{t-1},1) = (N-t)(alpha-E) - u1 and Vhat(0_{t-1},0) taken from
// the exact chain recursion (the continuation carries u1 at the never-work
// leaf as well, which the A.1 tree recursions imply).
inline std::vector<double> menu_foc_residual(const std::vector<double>& c,
                                             const Environment& env) {
    const int N = static_cast<int>(c.size());
    const CostDistribution& d = env.dist;
    const double E = d.mean();
    const MenuChain ch = menu_chain(c, env);
    std::vector<double> r(N);
    double pr = 1.0;
    for (int t = 1; t <= N; ++t) {
        const double vhat1 = (N - t) * (env.alpha - E) - ch.u1;
        const double dvh = vhat1 - ch.vhat0[t];
        const double f = d.density(c[t - 1]);
        r[t - 1] = pr * (env.alpha - c[t - 1] + dvh) - ch.F[t - 1] / f;
        pr *= 1.0 - ch.F[t - 1];
    }
    return r;
}

// Exact menu payoff from the chain recursion. The chain accrual subtracts
// I(c1) in period 1 while the payment rule's I-terms only start in period 2,
// so the expected payment is P_chain + I(c1) and V = vhat0[0] - I(c1).
inline double menu_payoff_chain(const std::vector<double>& c, const Environment& env) {
    const MenuChain ch = menu_chain(c, env);
    return ch.vhat0[0] - env.dist.cdf_integral(c[0]);
}

// Coordinate descent on the exact menu payoff; the workhorse for classifying
// boundary regions and the degraded fallback when Newton cannot converge.
inline std::vector<double> menu_descent(const Environment& env) {
    const int N = env.periods;
    const double lo = env.dist.lo(), hi = env.dist.hi();
    std::vector<double> c(N, 0.5 * (lo + hi));
    double best = menu_payoff_chain(c, env);
    double step = 0.125 * (hi - lo);
    while (step > 1e-13 * (hi - lo)) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int j = 0; j < N; ++j) {
                for (double cand : {c[j] - step, c[j] + step}) {
                    cand = std::min(std::max(cand, lo), hi);
                    const double old = c[j];
                    c[j] = cand;
                    const double v = menu_payoff_chain(c, env);
                    if (v > best) {
                        best = v;
                        improved = true;
                    } else {
                        c[j] = old;
                    }
                }
            }
        }
        step *= 0.5;
    }
    return c;
}

inline double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Solve J dx = -r in place, Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> J,
                                        std::vector<double> r) {
    const int n = static_cast<int>(r.size());
    for (auto& x : r) x = -x;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(J[i][k]) > std::abs(J[piv][k])) piv = i;
        std::swap(J[k], J[piv]);
        std::swap(r[k], r[piv]);
        if (J[k][k] == 0.0) throw SolverError("singular Jacobian in Newton step");
        for (int i = k + 1; i < n; ++i) {
            const double m = J[i][k] / J[k][k];
            for (int j = k; j < n; ++j) J[i][j] -= m * J[k][j];
            r[i] -= m * r[k];
        }
    }
    std::vector<double> dx(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = r[i];
        for (int j = i + 1; j < n; ++j) s -= J[i][j] * dx[j];
        dx[i] = s / J[i][i];
    }
    return dx;
}

}  // namespace detail

struct FocResult {
    ConsecMenu menu;
    double residual_inf = 0.0;
    bool degenerate = false;   // c1 pinned at thetabar: always-working limit
    bool used_fallback = false;
    int iterations = 0;
    int distinct_roots = 1;    // Newton basins found across restarts
    std::vector<double> residual_trace;
};

// Damped Newton with forward-difference Jacobian on the menu first-order
// system. Initialization at G^{-1}(min(alpha, G(thetabar))); a damped
// fixed-point warm-up and interior restarts cover Newton stalls.
inline FocResult solve_foc_system(const Environment& env) {
    const int N = env.periods;
    const CostDistribution& d = env.dist;
    const double lo = d.lo(), hi = d.hi(), width = hi - lo;
    const double h = 1e-6 * width;
    const double clamp_lo = lo + 1e-12;

    auto clamp = [&](double x) { return std::min(std::max(x, clamp_lo), hi); };
    auto resid = [&](const std::vector<double>& c) { return detail::menu_foc_residual(c, env); };

    auto newton_from = [&](std::vector<double> c, int max_iter, int* iters_out,
                           std::vector<double>* trace) -> std::pair<std::vector<double>, double> {
        std::vector<double> r = resid(c);
        double rn = detail::inf_norm(r);
        int it = 0;
        for (; it < max_iter && rn > kFocTol; ++it) {
            std::vector<std::vector<double>> J(N, std::vector<double>(N));
            for (int j = 0; j < N; ++j) {
                const double step = (c[j] + h > hi) ? -h : h;
                std::vector<double> cp = c;
                cp[j] += step;
                const std::vector<double> rp = resid(cp);
                for (int i = 0; i < N; ++i) J[i][j] = (rp[i] - r[i]) / step;
            }
            std::vector<double> dx;
            try {
                dx = detail::solve_linear(J, r);
            } catch (const SolverError&) {
                break;
            }
            double lambda = 1.0;
            bool improved = false;
            std::vector<double> cn(N), rnew;
            for (int halvings = 0; halvings <= 30; ++halvings) {
                for (int k = 0; k < N; ++k) cn[k] = clamp(c[k] + lambda * dx[k]);
                rnew = resid(cn);
                if (detail::inf_norm(rnew) < rn) {
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!improved) break;
            c = cn;
            r = rnew;
            rn = detail::inf_norm(r);
            if (trace) trace->push_back(rn);
        }
        if (iters_out) *iters_out = it;
        return {c, rn};
    };

    const double g_hi = virtual_cost(d, hi);
    const double init_v = virtual_cost_inverse(d, std::min(env.alpha, g_hi));
    std::vector<double> init(N, std::min(init_v, hi - 1e-9 * width));

    FocResult out;
    auto [c, rn] = newton_from(init, 100, &out.iterations, &out.residual_trace);

    auto pinned = [&](const std::vector<double>& cc) { return cc[0] >= hi - kDegenerateEps; };

    if (rn > kFocTol && !pinned(c)) {
        // damped fixed point c_t <- alpha + dVhat_t - F/(f Pr), then re-Newton
        out.used_fallback = true;
        std::vector<double> cf = c;
        for (int it = 0; it < 200; ++it) {
            const detail::MenuChain ch = detail::menu_chain(cf, env);
            std::vector<double> target(N);
            double pr = 1.0;
            const double E = d.mean();
            for (int t = 1; t <= N; ++t) {
                const double vhat1 = (N - t) * (env.alpha - E) - ch.u1;
                const double dvh = vhat1 - ch.vhat0[t];
                const double ratio =
                    (pr > 0.0) ? ch.F[t - 1] / (d.density(cf[t - 1]) * pr) : width;
                target[t - 1] = clamp(env.alpha + dvh - ratio);
                pr *= 1.0 - ch.F[t - 1];
            }
            for (int k = 0; k < N; ++k) cf[k] = 0.7 * cf[k] + 0.3 * target[k];
        }
        auto [c2, rn2] = newton_from(cf, 100, nullptr, &out.residual_trace);
        if (rn2 < rn) {
            c = c2;
            rn = rn2;
        }
    }
    if (rn > kFocTol && !pinned(c)) {
        // interior restarts; also counts distinct basins
        std::vector<std::vector<double>> roots;
        for (double frac : {0.5, 0.25, 0.75}) {
            auto [cr, rr] = newton_from(std::vector<double>(N, lo + frac * width), 100, nullptr,
                                        nullptr);
            if (rr <= kFocTol) {
                bool fresh = true;
                for (const auto& known : roots) {
                    double dist = 0.0;
                    for (int k = 0; k < N; ++k) dist = std::max(dist, std::abs(known[k] - cr[k]));
                    if (dist < 1e-6) fresh = false;
                }
                if (fresh) roots.push_back(cr);
                if (rr < rn) {
                    c = cr;
                    rn = rr;
                }
            }
        }
        out.distinct_roots = std::max<int>(1, static_cast<int>(roots.size()));
    }

    out.menu.start_cutoffs = c;
    out.residual_inf = rn;
    if (pinned(c)) {
        out.degenerate = true;
        out.menu.start_cutoffs.assign(N, hi);
        return out;
    }
    if (rn > kFocTol) {
        // Newton found no interior root; classify the region from the exact
        // payoff. An argmax with c1 at thetabar is the always-working limit.
        out.used_fallback = true;
        const std::vector<double> desc = detail::menu_descent(env);
        if (pinned(desc)) {
            out.degenerate = true;
            out.menu.start_cutoffs.assign(N, hi);
            return out;
        }
        auto [c3, rn3] = newton_from(desc, 100, nullptr, &out.residual_trace);
        if (pinned(c3)) {
            out.degenerate = true;
            out.menu.start_cutoffs.assign(N, hi);
            out.residual_inf = rn3;
            return out;
        }
        if (rn3 <= kFocTol) {
            out.menu.start_cutoffs = c3;
            out.residual_inf = rn3;
            return out;
        }
        std::ostringstream os;
        os << "solve_foc_system: no convergence, residual " << std::min(rn, rn3)
           << " after fallbacks; trace:";
        for (double v : out.residual_trace) os << " " << v;
        throw SolverError(os.str());
    }
    return out;
}

struct FeasibilityResult {
    bool ok = true;
    double margin = std::numeric_limits<double>::infinity();
    int argmin_t = 0;  // t in {0..N-2} attaining the margin
};

// Condition (4): min_t ( c_{t+1}(0) + sum_{i=t+2}^N I(c_i(0)) ) + E - thetabar >= 0.
// Under assumption 1 the margin is provably nonnegative, so the direct
// evaluation and the short-circuit agree.
inline FeasibilityResult feasibility(const ConsecMenu& menu, const Environment& env) {
    const int N = menu.periods();
    const CostDistribution& d = env.dist;
    FeasibilityResult res;
    if (N < 2) return res;  // no (0_t, 1 1) node exists
    std::vector<double> tail(N + 2, 0.0);  // tail[k] = sum_{i=k}^{N} I(c_i)
    for (int i = N; i >= 1; --i)
        tail[i] = tail[i + 1] + d.cdf_integral(menu.start_cutoffs[i - 1]);
    for (int t = 0; t <= N - 2; ++t) {
        const double m = menu.start_cutoffs[t] + tail[t + 2] + d.mean() - d.hi();
        if (m < res.margin) {
            res.margin = m;
            res.argmin_t = t;
        }
    }
    res.ok = res.margin >= 0.0 || check_assumption1(d);
    return res;
}

struct InteriorResult {
    bool interior = false;
    double m_value = 0.0;   // M at alpha = thetabar
    double g_at_hi = 0.0;   // G(thetabar); interior iff G(thetabar) > M
    bool foc_degenerate = false;
};

// Does a nonempty consecutive-menu region exist to the right of thetabar?
// Evaluated as G(thetabar) > M with M = alpha N - (N-1)E - u1* - Vhat(0),
// all at alpha = thetabar and the menu first-order solution.
inline InteriorResult interior_at_thetabar(const CostDistribution& d, int N) {
    Environment env(d, N, d.hi());
    InteriorResult res;
    res.g_at_hi = virtual_cost(d, d.hi());
    FocResult foc = solve_foc_system(env);
    res.foc_degenerate = foc.degenerate;
    if (foc.degenerate) {
        res.interior = false;
        return res;
    }
    const detail::MenuChain ch = detail::menu_chain(foc.menu.start_cutoffs, env);
    res.m_value = env.alpha * N - (N - 1) * d.mean() - ch.u1 - ch.vhat0[1];
    res.interior = res.g_at_hi > res.m_value;
    return res;
}

// All cutoffs at thetabar; payment thetabar + (N-1) E.
inline std::pair<Mechanism, double> always_working(const Environment& env) {
    ThresholdProfile p = ThresholdProfile::constant(env.periods, env.dist.hi(), env.dist.support());
    Mechanism m = Mechanism::from_profile(std::move(p), env.dist);
    const double v = env.alpha * env.periods - (env.dist.hi() + (env.periods - 1) * env.dist.mean());
    return {std::move(m), v};
}

enum class Regime { ConsecutiveMenu, AlwaysWorking };

inline const char* regime_name(Regime r) {
    return r == Regime::ConsecutiveMenu ? "consecutive_menu" : "always_working";
}

struct SolveReport {
    Regime regime = Regime::AlwaysWorking;
    std::optional<ConsecMenu> menu;
    double u1_star = 0.0;
    double v_star = 0.0;
    double v_aw = 0.0;
    double v_cm = std::numeric_limits<double>::quiet_NaN();
    double foc_residual = 0.0;
    bool foc_degenerate = false;
    bool degraded = false;  // grid fallback was needed
    bool assumption1 = false;
    bool condition4 = true;
    double condition4_margin = std::numeric_limits<double>::infinity();
    bool lemma_interior = false;
    double ir_min_slack = 0.0;
    double expected_work = 0.0;
    int distinct_roots = 1;
};

namespace detail {

// Exact payoff of a consecutive menu under the Def.-3 payment convention.
inline double menu_payoff(const ConsecMenu& menu, const Environment& env) {
    Mechanism m = Mechanism::menu_binding(menu.expand(env.dist), env.dist);
    return principal_payoff(m, env);
}

// Coordinate-descent fallback over the start cutoffs (degraded path).
inline ConsecMenu menu_coordinate_descent(const Environment& env) {
    return {menu_descent(env)};
}

}  // namespace detail

// Build both candidates, verify the menu's constraints, pick the larger
// payoff. Refuses alpha below thetabar (the regime theory needs work to be
// always efficient); oracle experiments below thetabar go through
// brute_force/principal_payoff directly.
inline SolveReport solve(const Environment& env) {
    if (env.alpha < env.dist.hi())
        throw RefusalError(
            "solve: alpha < thetabar is outside the theory's regime characterization; "
            "use the oracle/payoff operations for such experiments");
    if (env.periods > kMaxSolvePeriods)
        throw RefusalError("solve: N > 12 not supported");

    SolveReport rep;
    rep.assumption1 = check_assumption1(env.dist);
    try {
        rep.lemma_interior = interior_at_thetabar(env.dist, env.periods).interior;
    } catch (const SolverError&) {
        rep.lemma_interior = false;
    }

    auto [aw_mech, v_aw] = always_working(env);
    rep.v_aw = v_aw;

    FocResult foc;
    bool have_menu = false;
    try {
        foc = solve_foc_system(env);
        have_menu = !foc.degenerate;
        rep.foc_degenerate = foc.degenerate;
        rep.foc_residual = foc.residual_inf;
        rep.distinct_roots = foc.distinct_roots;
    } catch (const SolverError&) {
        foc.menu = detail::menu_coordinate_descent(env);
        foc.degenerate = foc.menu.start_cutoffs[0] >= env.dist.hi() - kDegenerateEps;
        rep.degraded = true;
        rep.foc_residual = detail::inf_norm(detail::menu_foc_residual(foc.menu.start_cutoffs, env));
        have_menu = !foc.degenerate;
        rep.foc_degenerate = foc.degenerate;
    }

    bool menu_ok = false;
    double v_cm = -std::numeric_limits<double>::infinity();
    Mechanism chosen = aw_mech;
    if (have_menu) {
        const FeasibilityResult feas = feasibility(foc.menu, env);
        rep.condition4 = feas.ok;
        rep.condition4_margin = feas.margin;
        Mechanism cm = Mechanism::menu_binding(foc.menu.expand(env.dist), env.dist);
        const IrReport ir = check_interim_ir(cm, env);
        menu_ok = feas.ok && !ir.violated;
        if (menu_ok) {
            v_cm = principal_payoff(cm, env);
            rep.v_cm = v_cm;
            if (v_cm > v_aw) {
                rep.regime = Regime::ConsecutiveMenu;
                rep.menu = foc.menu;
                chosen = cm;
            }
        }
    }
    rep.v_star = (rep.regime == Regime::ConsecutiveMenu) ? v_cm : v_aw;
    rep.u1_star = chosen.u1();
    rep.ir_min_slack = check_interim_ir(chosen, env).min_slack;
    rep.expected_work = expected_work(chosen, env.dist);
    return rep;
}

struct AlphaHatResult {
    double alpha_hat = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double gap_at_hat = 0.0;  // V_cm - V_aw at alpha_hat
    bool at_base = false;     // interior_at_thetabar failed: alpha_hat = thetabar by convention
    bool single_crossing = true;
    std::vector<std::pair<double, double>> crossing_samples;  // (alpha, gap)
};

namespace detail {

// V_cm - V_aw with degenerate/infeasible menus mapped to gap 0 (the menu
// coincides with always-working there).
inline double regime_gap(const CostDistribution& d, int N, double alpha) {
    Environment env(d, N, alpha);
    const double v_aw = alpha * N - (d.hi() + (N - 1) * d.mean());
    ConsecMenu menu;
    try {
        FocResult foc = solve_foc_system(env);
        if (foc.degenerate) return 0.0;
        menu = foc.menu;
    } catch (const SolverError&) {
        menu = ConsecMenu{menu_descent(env)};
        if (menu.start_cutoffs[0] >= d.hi() - kDegenerateEps) return 0.0;
    }
    if (!feasibility(menu, env).ok) return 0.0;
    return menu_payoff_chain(menu.start_cutoffs, env) - v_aw;
}

}  // namespace detail

// Bisect the regime boundary over [thetabar, (N-1) thetabar + G(thetabar)].
inline AlphaHatResult find_alpha_hat(const CostDistribution& d, int N) {
    AlphaHatResult res;
    const double base = d.hi();
    res.bracket_lo = base;
    res.bracket_hi = (N - 1) * d.hi() + virtual_cost(d, d.hi());
    if (!std::isfinite(res.bracket_hi))
        throw SolverError(
            "find_alpha_hat: switch bracket is unbounded; f(thetabar) = 0 keeps the menu "
            "interior at every valuation, so no always-working region exists");

    if (!interior_at_thetabar(d, N).interior) {
        res.alpha_hat = base;
        res.at_base = true;
        res.gap_at_hat = 0.0;
        return res;
    }
    const double gap_lo = detail::regime_gap(d, N, res.bracket_lo);
    const double gap_hi = detail::regime_gap(d, N, res.bracket_hi);
    if (!(gap_lo > 0.0) || gap_hi > 0.0) {
        std::ostringstream os;
        os << "find_alpha_hat: no regime change in bracket [" << res.bracket_lo << ", "
           << res.bracket_hi << "]; gaps " << gap_lo << ", " << gap_hi;
        throw SolverError(os.str());
    }
    double a = res.bracket_lo, b = res.bracket_hi;
    const double width_tol = 1e-8 * d.hi();
    while (b - a > width_tol) {
        const double mid = 0.5 * (a + b);
        if (detail::regime_gap(d, N, mid) > 0.0)
            a = mid;
        else
            b = mid;
    }
    res.alpha_hat = 0.5 * (a + b);
    res.gap_at_hat = detail::regime_gap(d, N, res.alpha_hat);

    // single-crossing probe: gaps must not turn positive again past the switch
    bool seen_nonpositive = false;
    for (int k = 0; k < 50; ++k) {
        const double alpha = res.bracket_lo + (res.bracket_hi - res.bracket_lo) * k / 49.0;
        const double g = detail::regime_gap(d, N, alpha);
        res.crossing_samples.emplace_back(alpha, g);
        if (g <= kSlackTol) seen_nonpositive = true;
        if (seen_nonpositive && g > kSlackTol) res.single_crossing = false;
    }
    return res;
}

struct BruteForceResult {
    ThresholdProfile profile;
    double value = 0.0;
    double final_step = 0.0;
};

namespace detail {

// Allocation-free exact objective for the oracle: u1* by reachable-node
// minimum, payments by revenue equivalence, payoff by tree recursion.
// Semantics cross-checked against Mechanism::from_profile in the tests.
struct OracleEval {
    const CostDistribution* d;
    double alpha;
    int N;
    std::vector<double> F, I;  // per node, profile order

    void prepare(const std::vector<double>& cutoffs) {
        const std::size_t n = cutoffs.size();
        F.resize(n);
        I.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            F[i] = d->cdf(cutoffs[i]);
            I[i] = d->cdf_integral(cutoffs[i]);
        }
    }

    double evaluate(const std::vector<double>& cutoffs) {
        prepare(cutoffs);
        const double u1 = -min_s_rec(0, 0, 0.0, cutoffs);
        return payoff_rec(0, 0, cutoffs, u1, 0.0, 0.0, 0);
    }

  private:
    // profile index of child of `idx` (length len) when appending bit b:
    // children live at offset (2^{len+1}-1) + (bits | b<<len); we recompute
    // bits from idx.
    static std::size_t child_index(std::size_t idx, int len, int bit) {
        const std::size_t base = (std::size_t{1} << len) - 1;
        const std::size_t bits = idx - base;
        return ((std::size_t{2} << len) - 1) + (bits | (static_cast<std::size_t>(bit) << len));
    }

    double min_s_rec(std::size_t idx, int len, double s, const std::vector<double>& c) const {
        double best = (len > 0) ? s : 0.0;
        if (len == N - 1) return best;
        const double Fi = F[idx];
        if (Fi > 0.0) {
            const std::size_t j = child_index(idx, len, 1);
            best = std::min(best, min_s_rec(j, len + 1, s + c[idx] - I[j], c));
        }
        if (Fi < 1.0) {
            const std::size_t j = child_index(idx, len, 0);
            best = std::min(best, min_s_rec(j, len + 1, s - I[j], c));
        }
        return best;
    }

    // expected alpha #work - p over the subtree; work_sum/i_sum accumulate the
    // payment terms along the path
    double payoff_rec(std::size_t idx, int len, const std::vector<double>& c, double u1,
                      double work_sum, double i_sum, int work_count) const {
        if (len == N) {
            return alpha * work_count - (work_sum - i_sum + u1);
        }
        const double Fi = F[idx];
        const double Ii = (len >= 1) ? I[idx] : 0.0;
        double v = 0.0;
        if (Fi > 0.0)
            v += Fi * payoff_rec(child_index(idx, len, 1), len + 1, c, u1, work_sum + c[idx],
                                 i_sum + Ii, work_count + 1);
        if (Fi < 1.0)
            v += (1.0 - Fi) * payoff_rec(child_index(idx, len, 0), len + 1, c, u1, work_sum,
                                         i_sum + Ii, work_count);
        return v;
    }
};

}  // namespace detail

// Exhaustive grid over all 2^N - 1 cutoffs followed by coordinate-descent
// refinement with step halving. No structural restriction: this is the
// oracle the menu results are checked against.
inline BruteForceResult brute_force(const Environment& env, int grid_points, int refine_rounds,
                                    int threads = 0) {
    if (env.periods > 3) throw RefusalError("brute_force: N must be <= 3 (7 unknowns max)");
    if (grid_points < 2) throw std::invalid_argument("brute_force: need at least 2 grid points");
    const int N = env.periods;
    const std::size_t K = ThresholdProfile::node_count(N);
    const double lo = env.dist.lo(), hi = env.dist.hi();
    const double step0 = (hi - lo) / (grid_points - 1);

    std::vector<double> axis(grid_points);
    for (int i = 0; i < grid_points; ++i)
        axis[i] = (i == grid_points - 1) ? hi : lo + step0 * i;

    const std::size_t total_first = grid_points;
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(total_first)));

    struct Best {
        double v = -std::numeric_limits<double>::infinity();
        std::vector<std::size_t> combo;
    };
    std::vector<Best> results(threads);

    auto worker = [&](int tid) {
        detail::OracleEval eval{&env.dist, env.alpha, N, {}, {}};
        std::vector<std::size_t> combo(K, 0);
        std::vector<double> cutoffs(K);
        Best& best = results[tid];
        for (std::size_t first = tid; first < total_first; first += threads) {
            combo.assign(K, 0);
            combo[0] = first;
            while (true) {
                for (std::size_t k = 0; k < K; ++k) cutoffs[k] = axis[combo[k]];
                const double v = eval.evaluate(cutoffs);
                if (v > best.v || (v == best.v && combo < best.combo)) {
                    best.v = v;
                    best.combo = combo;
                }
                // odometer over coords 1..K-1
                std::size_t k = K - 1;
                for (;;) {
                    if (k == 0) goto slab_done;
                    if (++combo[k] < static_cast<std::size_t>(grid_points)) break;
                    combo[k] = 0;
                    --k;
                }
            }
        slab_done:;
        }
    };
    if (K == 1) {
        // N=1: single axis, no odometer
        detail::OracleEval eval{&env.dist, env.alpha, N, {}, {}};
        Best& best = results[0];
        for (int i = 0; i < grid_points; ++i) {
            const double v = eval.evaluate({axis[i]});
            if (v > best.v) {
                best.v = v;
                best.combo = {static_cast<std::size_t>(i)};
            }
        }
    } else {
        std::vector<std::thread> pool;
        for (int tws = 0; tws < threads; ++tws) pool.emplace_back(worker, tws);
        for (auto& th : pool) th.join();
    }

    Best best;
    for (const auto& b : results)
        if (b.v > best.v || (b.v == best.v && !b.combo.empty() &&
                             (best.combo.empty() || b.combo < best.combo)))
            best = b;

    std::vector<double> cutoffs(K);
    for (std::size_t k = 0; k < K; ++k) cutoffs[k] = axis[best.combo[k]];

    // coordinate descent, halving the step each round
    detail::OracleEval eval{&env.dist, env.alpha, N, {}, {}};
    double v = best.v;
    double step = step0;
    for (int round = 0; round < refine_rounds; ++round) {
        step *= 0.5;
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t k = 0; k < K; ++k) {
                for (double cand : {cutoffs[k] - step, cutoffs[k] + step}) {
                    cand = std::min(std::max(cand, lo), hi);
                    const double old = cutoffs[k];
                    cutoffs[k] = cand;
                    const double vv = eval.evaluate(cutoffs);
                    if (vv > v) {
                        v = vv;
                        improved = true;
                    } else {
                        cutoffs[k] = old;
                    }
                }
            }
        }
    }
    return {ThresholdProfile(N, cutoffs, env.dist.support()), v,
            refine_rounds > 0 ? step : step0};
}

struct SweepRow {
    double alpha = 0.0;
    Regime regime = Regime::AlwaysWorking;
    double v_star = 0.0;
    double v_aw = 0.0;
    std::vector<double> start_cutoffs;  // thetabar for always-working rows
    double expected_work = 0.0;
};

// One solve per alpha; ascending alphas at or above thetabar.
inline std::vector<SweepRow> sweep_alpha(const CostDistribution& d, int N,
                                         const std::vector<double>& alpha_grid) {
    std::vector<SweepRow> rows;
    double prev = -std::numeric_limits<double>::infinity();
    for (double a : alpha_grid) {
        if (a < prev) throw std::invalid_argument("sweep_alpha: grid must be ascending");
        if (a < d.hi()) throw RefusalError("sweep_alpha: all alphas must be >= thetabar");
        prev = a;
        Environment env(d, N, a);
        const SolveReport rep = solve(env);
        SweepRow row;
        row.alpha = a;
        row.regime = rep.regime;
        row.v_star = rep.v_star;
        row.v_aw = rep.v_aw;
        row.expected_work = rep.expected_work;
        row.start_cutoffs =
            rep.menu ? rep.menu->start_cutoffs : std::vector<double>(N, d.hi());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace screenlab
