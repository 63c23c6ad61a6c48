// Stochastic improvement over an optimal deterministic consecutive menu:
// randomize the period-1 recommendation on [x_sb, c1*], move every promised
// rent onto the shirk realization, and collect the exact payoff gain
// Delta = eps (H(c1*) - H(x_sb)), H(theta) = F(theta)(theta - alpha).
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "screenlab/solver.hpp"

namespace screenlab {

struct StochasticMechanism {
    ConsecMenu base_menu;
    Mechanism base;       // menu-binding expansion of the base menu
    double base_value;    // V* of the deterministic base
    double u1_star;       // of the base menu
    double c1_star;
    double x_sb;          // G^{-1}(alpha)
    double epsilon;
    double eps_upper;     // u1* / (thetabar - E)

    // probability of a work recommendation in period 1
    double q1(double theta1) const {
        if (theta1 < x_sb) return 1.0;
        if (theta1 <= c1_star) return 1.0 - epsilon;
        return 0.0;
    }
    // integral of q1 from theta1 to thetabar
    double q1_tail(double theta1) const {
        if (theta1 < x_sb)
            return (x_sb - theta1) + (1.0 - epsilon) * (c1_star - x_sb);
        if (theta1 <= c1_star) return (1.0 - epsilon) * (c1_star - theta1);
        return 0.0;
    }

    // final payments; N-1 periods of sure work follow period 1 on both
    // realizations for theta1 <= c1*
    double payment_sure_work(double theta1, double mean, int N) const {  // theta1 < x_sb
        return theta1 + q1_tail(theta1) + u1_star + (N - 1) * mean;
    }
    double payment_work_branch(double theta1, double mean, int N) const {  // [x_sb, c1*]
        return theta1 + (N - 1) * mean;
    }
    double payment_shirk_branch(double theta1, double mean, int N) const {  // [x_sb, c1*]
        return (u1_star + q1_tail(theta1)) / epsilon + (N - 1) * mean;
    }
};

namespace detail {

inline StochasticMechanism build_stochastic(const SolveReport& report, const Environment& env,
                                            double eps, bool enforce_range) {
    if (report.regime != Regime::ConsecutiveMenu || !report.menu)
        throw std::invalid_argument(
            "build_improvement: base must be a consecutive-working menu (always-working has no "
            "first-period rent to reallocate)");
    if (!check_assumption1(env.dist))
        throw std::invalid_argument(
            "build_improvement: construction requires theta_lo + E(theta) >= thetabar");

    StochasticMechanism sm{
        *report.menu,
        Mechanism::menu_binding(report.menu->expand(env.dist), env.dist),
        report.v_star,
        report.u1_star,
        report.menu->start_cutoffs[0],
        virtual_cost_inverse(env.dist, env.alpha),
        eps,
        report.u1_star / (env.dist.hi() - env.dist.mean())};
    if (!(sm.x_sb < sm.c1_star))
        throw std::invalid_argument("build_improvement: x_sb >= c1*, no improvement exists");
    if (enforce_range && !(eps > 0.0 && eps <= sm.eps_upper)) {
        std::ostringstream os;
        os << "build_improvement: epsilon=" << eps << " outside (0, " << sm.eps_upper << "]";
        throw std::invalid_argument(os.str());
    }
    return sm;
}

}  // namespace detail

inline StochasticMechanism build_improvement(const SolveReport& report, const Environment& env,
                                             double eps) {
    return detail::build_stochastic(report, env, eps, true);
}

// Diagnostics only: admits epsilon beyond the admissible interval so the
// sharpness of the bound can be probed.
inline StochasticMechanism build_improvement_unchecked(const SolveReport& report,
                                                       const Environment& env, double eps) {
    return detail::build_stochastic(report, env, eps, false);
}

// Delta = eps (H(c1*) - H(x_sb)).
inline double improvement_delta(const SolveReport& report, const Environment& env, double eps) {
    if (report.regime != Regime::ConsecutiveMenu || !report.menu)
        throw std::invalid_argument("improvement_delta: base must be a consecutive menu");
    const double c1 = report.menu->start_cutoffs[0];
    const double xsb = virtual_cost_inverse(env.dist, env.alpha);
    auto H = [&](double t) { return env.dist.cdf(t) * (t - env.alpha); };
    return eps * (H(c1) - H(xsb));
}

// Exact expected principal payoff of the stochastic mechanism by closed
// integration over the three theta_1 segments (only period 1 is randomized,
// so no tree expansion is needed).
inline double stochastic_payoff(const StochasticMechanism& sm, const Environment& env) {
    const CostDistribution& d = env.dist;
    const int N = env.periods;
    const double a = env.alpha, E = d.mean(), eps = sm.epsilon;
    const double Fx = d.cdf(sm.x_sb), Fc = d.cdf(sm.c1_star);

    // [lo, x_sb): work for sure; the theta1 in the payment cancels the rent
    const double p_low = sm.x_sb + (1.0 - eps) * (sm.c1_star - sm.x_sb) + sm.u1_star + (N - 1) * E;
    const double seg1 = Fx * (a * N - p_low);
    // [x_sb, c1*]: averaging the two branches makes the integrand constant
    const double g = (1.0 - eps) * (a * N - (N - 1) * E) + eps * (N - 1) * (a - E) - sm.u1_star -
                     (1.0 - eps) * sm.c1_star;
    const double seg2 = (Fc - Fx) * g;
    // (c1*, hi]: the deterministic menu continues after a first-period shirk
    const detail::MenuChain ch = detail::menu_chain(sm.base_menu.start_cutoffs, env);
    const double seg3 = (1.0 - Fc) * ch.vhat0[1];
    return seg1 + seg2 + seg3;
}

struct StochasticCheck {
    double min_slack = 0.0;
    std::string worst;
    double envelope_max_err = 0.0;
    bool q1_monotone = true;
    bool ok = true;
};

// Periodic ex-post IR at the worst-case nodes after both first-period
// realizations, the t=1 envelope identity, and first-period participation.
inline StochasticCheck verify_stochastic(const StochasticMechanism& sm, const Environment& env) {
    const CostDistribution& d = env.dist;
    const int N = env.periods;
    const double E = d.mean(), hi = d.hi();
    StochasticCheck rep;
    bool first = true;
    auto consider = [&](double slack, const std::string& what) {
        if (first || slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.worst = what;
            first = false;
        }
    };

    sm.base.verify_cache(d);
    std::vector<double> W;
    detail::fill_gross_continuation(sm.base, d, W);

    // t = 1, periodic ex-post, both realizations, across the segments
    const int grid = 101;
    for (int k = 0; k < grid; ++k) {
        const double th = d.lo() + d.support().width() * k / (grid - 1.0);
        if (th < sm.x_sb) {
            consider(sm.payment_sure_work(th, E, N) - th - (N - 1) * E, "t=1 work, low segment");
        } else if (th <= sm.c1_star) {
            consider(sm.payment_work_branch(th, E, N) - th - (N - 1) * E, "t=1 work branch");
            consider(sm.payment_shirk_branch(th, E, N) - (N - 1) * E, "t=1 shirk branch");
        } else {
            const bool work = th <= sm.base.profile().cutoff(WorkHistory::empty());
            const double u = (work ? -th : 0.0) +
                             W[ThresholdProfile::index(WorkHistory::empty().append(work))];
            consider(u, "t=1 base segment");
        }
    }

    // t >= 2 worst cases (theta_t = thetabar) after each first-period branch
    for (int t = 2; t <= N; ++t) {
        const double low_p = sm.payment_sure_work(d.lo(), E, N);  // constant over the segment
        consider(low_p - hi - (N - t) * E, "t=" + std::to_string(t) + " after sure work");
        consider(sm.payment_work_branch(sm.x_sb, E, N) - hi - (N - t) * E,
                 "t=" + std::to_string(t) + " after work branch");
        consider(sm.payment_shirk_branch(sm.c1_star, E, N) - hi - (N - t) * E,
                 "t=" + std::to_string(t) + " after shirk branch");
    }
    // base subtree worst cases (first-period shirk in the deterministic menu)
    const IrReport base_ir = check_interim_ir(sm.base, env);
    consider(base_ir.min_slack, "base menu worst node");

    // envelope identity u1(theta1) = u1* + int_{theta1}^{hi} q1
    for (int k = 0; k < grid; ++k) {
        const double th = d.lo() + d.support().width() * k / (grid - 1.0);
        double u;
        if (th < sm.x_sb) {
            u = sm.payment_sure_work(th, E, N) - th - (N - 1) * E;
        } else if (th <= sm.c1_star) {
            const double uw = sm.payment_work_branch(th, E, N) - th - (N - 1) * E;
            const double us = sm.payment_shirk_branch(th, E, N) - (N - 1) * E;
            u = (1.0 - sm.epsilon) * uw + sm.epsilon * us;
        } else {
            const bool work = th <= sm.base.profile().cutoff(WorkHistory::empty());
            u = (work ? -th : 0.0) +
                W[ThresholdProfile::index(WorkHistory::empty().append(work))];
        }
        rep.envelope_max_err =
            std::max(rep.envelope_max_err, std::abs(u - (sm.u1_star + sm.q1_tail(th))));
    }

    rep.q1_monotone = sm.epsilon >= 0.0 && sm.epsilon <= 1.0 && sm.x_sb <= sm.c1_star;
    rep.ok = rep.min_slack >= -kSlackTol && rep.envelope_max_err <= kSlackTol && rep.q1_monotone;
    return rep;
}

// Implementation split of a randomized recommendation: zero surplus on the
// work branch, rent/(1-q) on the shirk branch. Branch-weighted expectation
// reconstructs the rent exactly.
inline std::pair<double, double> split_promise(double q, double rent) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("split_promise: q must be in [0, 1]");
    if (rent < 0.0) throw std::invalid_argument("split_promise: rent must be nonnegative");
    if (q == 1.0) {
        if (rent > 0.0)
            throw std::invalid_argument("split_promise: q=1 with positive rent is degenerate");
        return {0.0, 0.0};
    }
    return {0.0, rent / (1.0 - q)};
}

}  // namespace screenlab
