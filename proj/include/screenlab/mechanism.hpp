// Mechanism algebra on the working-status tree: the minimal top-type rent
// u1*, final payments, exact principal/agent payoffs, interim participation
// slacks, one-shot deviation values, the pay-at-the-end transform, and
// per-node continuation statistics.
//
// Conventions used throughout:
//  - Work-status nodes that occur with probability zero impose no
//    participation constraint and are skipped by the u1* minimum and the IR
//    sweep (no cost history induces them).
//  - S(t, w) = sum_{i<t} x_i c_i(w_{i-1}) - sum_{2<=i<=t} I(c_i(w_{i-1})) is
//    the accumulated-surplus term whose minimum over nodes gives -u1*.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "screenlab/dist.hpp"
#include "screenlab/history.hpp"
#include "screenlab/profile.hpp"

namespace screenlab {

inline constexpr double kSlackTol = 1e-9;  // numeric slack tolerance, one order above quadrature
inline constexpr int kMaxSolvePeriods = 12;

struct Environment {
    CostDistribution dist;
    int periods;
    double alpha;
    bool efficient_regime;  // alpha >= hi: work is always efficient

    Environment(CostDistribution d, int n, double a)
        : dist(std::move(d)), periods(n), alpha(a), efficient_regime(a >= dist.hi()) {
        if (n < 1 || n > kMaxPeriods)
            throw std::invalid_argument("Environment: N must be in [1, " +
                                        std::to_string(kMaxPeriods) + "]");
        if (!(a >= dist.lo()))
            throw std::invalid_argument("Environment: alpha must be >= theta_lo");
    }
};

struct NodeState {
    int t;               // period, 1-based
    WorkHistory w_prev;  // length t-1
    double theta;

    NodeState(int t_, WorkHistory w, double theta_) : t(t_), w_prev(w), theta(theta_) {
        if (t_ < 1 || w.length != t_ - 1)
            throw std::invalid_argument("NodeState: history length must be t-1");
    }
};

struct U1Result {
    double value = 0.0;            // u1*(thetabar), minimized over t in {1..N}
    double value_t_below_n = 0.0;  // diagnostic variant with t restricted to {1..N-1}
    std::vector<std::pair<int, WorkHistory>> argmin;  // nodes attaining the minimum
};

// u1*(thetabar) = -min over reachable nodes (t, w_{t-1}) of S(t, w).
inline U1Result u1_star(const ThresholdProfile& profile, const CostDistribution& d) {
    const int N = profile.periods();
    U1Result res;
    double min_all = 0.0;
    double min_below = 0.0;
    std::vector<std::pair<int, WorkHistory>> argmin{{1, WorkHistory::empty()}};

    // DFS with accumulated work-sum and I-sum; prune zero-probability branches.
    struct Frame {
        WorkHistory w;
        double s;  // S(len+1, w)
    };
    std::vector<Frame> stack{{WorkHistory::empty(), 0.0}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const int len = fr.w.length;
        const int t = len + 1;
        if (len > 0) {
            if (fr.s < min_all) {
                min_all = fr.s;
                argmin.assign(1, {t, fr.w});
            } else if (fr.s == min_all) {
                argmin.emplace_back(t, fr.w);
            }
            if (t <= N - 1) min_below = std::min(min_below, fr.s);
        }
        if (len == N - 1) continue;
        // children are candidates at t+1; the child S already includes the
        // I-term of the child's own cutoff
        const double c = profile.cutoff(fr.w);
        const double F = d.cdf(c);
        if (F > 0.0) {
            const WorkHistory w1 = fr.w.append(true);
            stack.push_back({w1, fr.s + c - d.cdf_integral(profile.cutoff(w1))});
        }
        if (F < 1.0) {
            const WorkHistory w0 = fr.w.append(false);
            stack.push_back({w0, fr.s - d.cdf_integral(profile.cutoff(w0))});
        }
    }
    res.value = -min_all;
    res.value_t_below_n = -min_below;
    res.argmin = std::move(argmin);
    return res;
}

// A mechanism is a threshold profile plus a payment rule. Payments normally
// follow the revenue-equivalence formula
//   p_N(w) = sum_t x_t c_t(w_{t-1}) - sum_{t>=2} I(c_t(w_{t-1})) + u1*,
// with u1* either the general minimum (FromProfile) or the consecutive-menu
// binding value sum_{t>=2} I(c_t(0)) (MenuBinding). Backloaded schedules use
// an explicit per-leaf table instead.
class Mechanism {
  public:
    enum class U1Mode { FromProfile, MenuBinding };
    enum class PayMode { RevenueEquivalence, LeafTable };

    static Mechanism from_profile(ThresholdProfile profile, const CostDistribution& d) {
        Mechanism m(std::move(profile));
        m.u1_mode_ = U1Mode::FromProfile;
        m.u1_star_ = u1_star(m.profile_, d).value;
        return m;
    }

    // Consecutive-menu payments: u1* pinned by the binding all-shirk IR.
    static Mechanism menu_binding(ThresholdProfile profile, const CostDistribution& d) {
        Mechanism m(std::move(profile));
        m.u1_mode_ = U1Mode::MenuBinding;
        m.u1_star_ = menu_u1(m.profile_, d);
        return m;
    }

    static Mechanism from_leaf_table(ThresholdProfile profile, std::vector<double> leaf_payments) {
        Mechanism m(std::move(profile));
        m.pay_mode_ = PayMode::LeafTable;
        if (leaf_payments.size() != (std::size_t{1} << m.profile_.periods()))
            throw std::invalid_argument("Mechanism: leaf table size mismatch");
        m.leaf_payments_ = std::move(leaf_payments);
        return m;
    }

    const ThresholdProfile& profile() const { return profile_; }
    int periods() const { return profile_.periods(); }
    double u1() const { return u1_star_; }
    PayMode pay_mode() const { return pay_mode_; }
    bool tampered() const { return tampered_; }

    // Fault-injection for the behavioral verifiers. The result is flagged and
    // exempt from the cache check.
    Mechanism corrupt_payment(const WorkHistory& leaf, double delta) const {
        if (leaf.length != periods())
            throw std::invalid_argument("corrupt_payment: need a leaf history");
        Mechanism m = *this;
        if (m.payment_delta_.empty())
            m.payment_delta_.assign(std::size_t{1} << periods(), 0.0);
        m.payment_delta_[leaf.bits] += delta;
        m.tampered_ = true;
        return m;
    }
    Mechanism corrupt_u1(double delta) const {
        if (pay_mode_ == PayMode::LeafTable)
            throw std::invalid_argument("corrupt_u1: leaf-table mechanism has no u1");
        Mechanism m = *this;
        m.u1_star_ += delta;
        m.tampered_ = true;
        return m;
    }

    double final_payment(const CostDistribution& d, const WorkHistory& w) const {
        if (w.length != periods())
            throw std::invalid_argument("final_payment: need a length-N history");
        double p;
        if (pay_mode_ == PayMode::LeafTable) {
            p = leaf_payments_[w.bits];
        } else {
            double work_sum = 0.0, i_sum = 0.0;
            for (int t = 0; t < w.length; ++t) {
                const double c = profile_.cutoff(w.prefix(t));
                if (w.worked(t)) work_sum += c;
                if (t >= 1) i_sum += d.cdf_integral(c);
            }
            p = work_sum - i_sum + u1_star_;
        }
        if (!payment_delta_.empty()) p += payment_delta_[w.bits];
        return p;
    }

    // Recompute the cached u1* and require bitwise agreement. Guards against
    // stale payments after profile edits; tampered mechanisms are exempt.
    void verify_cache(const CostDistribution& d) const {
        if (tampered_ || pay_mode_ == PayMode::LeafTable) return;
        const double fresh = (u1_mode_ == U1Mode::FromProfile) ? u1_star(profile_, d).value
                                                               : menu_u1(profile_, d);
        if (fresh != u1_star_)
            throw std::runtime_error("Mechanism: cached u1* is stale (profile mutated?)");
    }

    ThresholdProfile& mutable_profile() { return profile_; }

    static double menu_u1(const ThresholdProfile& profile, const CostDistribution& d) {
        double s = 0.0;
        for (int t = 2; t <= profile.periods(); ++t)
            s += d.cdf_integral(profile.cutoff(WorkHistory::all_shirk(t - 1)));
        return s;
    }

  private:
    explicit Mechanism(ThresholdProfile profile) : profile_(std::move(profile)) {}

    ThresholdProfile profile_;
    double u1_star_ = 0.0;
    U1Mode u1_mode_ = U1Mode::FromProfile;
    PayMode pay_mode_ = PayMode::RevenueEquivalence;
    std::vector<double> leaf_payments_;
    std::vector<double> payment_delta_;
    bool tampered_ = false;
};

namespace detail {

// Gross continuation value at the start of period len(v)+1 given node v:
// W(v) = E[p_N | v] - E[future work costs | v]. Interim utility then is
// u_t(w, theta) = -theta * x + W((w, x)).
inline void fill_gross_continuation(const Mechanism& mech, const CostDistribution& d,
                                    std::vector<double>& W) {
    const int N = mech.periods();
    W.assign((std::size_t{2} << N) - 1, 0.0);
    for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << N); ++bits) {
        const WorkHistory leaf{N, bits};
        W[ThresholdProfile::index(leaf)] = mech.final_payment(d, leaf);
    }
    for (int len = N - 1; len >= 0; --len) {
        for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << len); ++bits) {
            const WorkHistory w{len, bits};
            const double c = mech.profile().cutoff(w);
            const double F = d.cdf(c);
            const double work_cost = c * F - d.cdf_integral(c);  // E[theta; theta <= c]
            W[ThresholdProfile::index(w)] =
                -work_cost + F * W[ThresholdProfile::index(w.append(true))] +
                (1.0 - F) * W[ThresholdProfile::index(w.append(false))];
        }
    }
}

}  // namespace detail

// Exact expected principal payoff: sum over leaves of Pr(w)(alpha #work - p).
inline double principal_payoff(const Mechanism& mech, const Environment& env) {
    mech.verify_cache(env.dist);
    const int N = mech.periods();
    double total = 0.0;
    struct Frame {
        WorkHistory w;
        double prob;
        int work;
    };
    std::vector<Frame> stack{{WorkHistory::empty(), 1.0, 0}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        if (fr.w.length == N) {
            total += fr.prob * (env.alpha * fr.work - mech.final_payment(env.dist, fr.w));
            continue;
        }
        const double F = env.dist.cdf(mech.profile().cutoff(fr.w));
        if (F > 0.0) stack.push_back({fr.w.append(true), fr.prob * F, fr.work + 1});
        if (F < 1.0) stack.push_back({fr.w.append(false), fr.prob * (1.0 - F), fr.work});
    }
    return total;
}

// Expected number of working periods under the mechanism.
inline double expected_work(const Mechanism& mech, const CostDistribution& d) {
    const int N = mech.periods();
    double total = 0.0;
    struct Frame {
        WorkHistory w;
        double prob;
    };
    std::vector<Frame> stack{{WorkHistory::empty(), 1.0}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        if (fr.w.length == N) continue;
        const double F = d.cdf(mech.profile().cutoff(fr.w));
        total += fr.prob * F;
        if (F > 0.0) stack.push_back({fr.w.append(true), fr.prob * F});
        if (F < 1.0) stack.push_back({fr.w.append(false), fr.prob * (1.0 - F)});
    }
    return total;
}

// Interim expected continuation utility at a node, truthful play throughout.
inline double agent_interim_utility(const Mechanism& mech, const Environment& env,
                                    const NodeState& node) {
    if (node.t > mech.periods())
        throw std::invalid_argument("agent_interim_utility: period beyond horizon");
    std::vector<double> W;
    detail::fill_gross_continuation(mech, env.dist, W);
    const double c = mech.profile().cutoff(node.w_prev);
    const bool work = node.theta <= c;
    const WorkHistory next = node.w_prev.append(work);
    return (work ? -node.theta : 0.0) + W[ThresholdProfile::index(next)];
}

struct IrReport {
    double min_slack = 0.0;
    int argmin_t = 1;
    WorkHistory argmin_w;
    bool violated = false;  // min_slack < -kSlackTol
};

// Interim IR sweep over every reachable node at the per-branch worst case
// theta = thetabar. With paranoid=true a theta grid per node is also checked
// (the envelope makes thetabar the minimizer, so this is belt and braces).
inline IrReport check_interim_ir(const Mechanism& mech, const Environment& env,
                                 bool paranoid = false, int theta_grid = 17) {
    mech.verify_cache(env.dist);
    const int N = mech.periods();
    std::vector<double> W;
    detail::fill_gross_continuation(mech, env.dist, W);

    IrReport rep;
    bool first = true;
    auto consider = [&](double slack, int t, const WorkHistory& w) {
        if (first || slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.argmin_t = t;
            rep.argmin_w = w;
            first = false;
        }
    };

    std::vector<WorkHistory> stack{WorkHistory::empty()};
    while (!stack.empty()) {
        const WorkHistory w = stack.back();
        stack.pop_back();
        const int t = w.length + 1;
        const double c = mech.profile().cutoff(w);
        const double F = env.dist.cdf(c);
        const double hi = env.dist.hi();
        // worst case: current cost at the top of the support
        const double u_bar = (hi <= c) ? -hi + W[ThresholdProfile::index(w.append(true))]
                                       : W[ThresholdProfile::index(w.append(false))];
        consider(u_bar, t, w);
        if (paranoid) {
            for (int k = 0; k < theta_grid; ++k) {
                const double th =
                    env.dist.lo() + env.dist.support().width() * k / (theta_grid - 1.0);
                const bool work = th <= c;
                const double u =
                    (work ? -th : 0.0) + W[ThresholdProfile::index(w.append(work))];
                consider(u, t, w);
            }
        }
        if (w.length < N - 1) {
            if (F > 0.0) stack.push_back(w.append(true));
            if (F < 1.0) stack.push_back(w.append(false));
        }
    }
    rep.violated = rep.min_slack < -kSlackTol;
    return rep;
}

// Continuation utility after reporting on the chosen side of the cutoff this
// period and reporting truthfully afterwards. When the requested side does
// not exist (forcing shirk at cutoff thetabar), the truthful value is
// returned.
inline double deviation_value(const Mechanism& mech, const Environment& env,
                              const NodeState& node, bool forced_work) {
    std::vector<double> W;
    detail::fill_gross_continuation(mech, env.dist, W);
    const double c = mech.profile().cutoff(node.w_prev);
    const bool truthful_work = node.theta <= c;
    bool act = forced_work;
    if (!forced_work && c >= env.dist.hi()) act = truthful_work;  // no report above the cutoff
    return (act ? -node.theta : 0.0) + W[ThresholdProfile::index(node.w_prev.append(act))];
}

struct ContinuationStats {
    double expected_future_work = 0.0;  // T(w)
    double pending_payment = 0.0;       // P(w): E[p_N | w] minus accrued terms
    double v_hat = 0.0;                 // alpha T - P
};

// T, P, V-hat by exact subtree recursion. Revenue-equivalence payments only.
inline ContinuationStats continuation_stats(const Mechanism& mech, const Environment& env,
                                            const WorkHistory& w) {
    if (mech.pay_mode() != Mechanism::PayMode::RevenueEquivalence)
        throw std::invalid_argument("continuation_stats: needs revenue-equivalence payments");
    const int N = mech.periods();
    if (w.length > N) throw std::invalid_argument("continuation_stats: node deeper than N");

    // recursion over the subtree below w
    std::function<std::pair<double, double>(const WorkHistory&)> rec =
        [&](const WorkHistory& v) -> std::pair<double, double> {
        if (v.length == N) return {0.0, mech.u1()};
        const double c = mech.profile().cutoff(v);
        const double F = env.dist.cdf(c);
        const auto [T1, P1] = rec(v.append(true));
        const auto [T0, P0] = rec(v.append(false));
        const double T = F * (1.0 + T1) + (1.0 - F) * T0;
        // period len+1 accrual; the I-term only exists from period 2 on
        double accr = F * c;
        if (v.length >= 1) accr -= env.dist.cdf_integral(c);
        const double P = accr + F * P1 + (1.0 - F) * P0;
        return {T, P};
    };
    const auto [T, P] = rec(w);
    return {T, P, env.alpha * T - P};
}

// Interim payment schedule on the tree: pay(w_t) is handed over at the end of
// period t after the action realization, so it may depend on the full w_t.
struct InterimSchedule {
    int periods;
    std::vector<double> pay;  // indexed by ThresholdProfile::index, lengths 1..N

    explicit InterimSchedule(int n) : periods(n), pay((std::size_t{2} << n) - 1, 0.0) {}
    double& at(const WorkHistory& w) {
        if (w.length < 1 || w.length > periods)
            throw std::invalid_argument("InterimSchedule: node length must be 1..N");
        return pay[ThresholdProfile::index(w)];
    }
    double at(const WorkHistory& w) const {
        return pay[ThresholdProfile::index(w)];
    }
};

struct BackloadResult {
    Mechanism mechanism;          // pay-at-the-end version
    double payoff_before = 0.0;   // expected principal payoff of the schedule
    double payoff_after = 0.0;    // same, after backloading
    double min_slack_before = 0.0;
    double min_slack_after = 0.0;
};

// Defer every interim payment to period N along each path. Expected payments
// per leaf are unchanged; participation slacks can only go up because earned
// amounts are still pending when the agent considers quitting.
inline BackloadResult backload(const InterimSchedule& schedule, const ThresholdProfile& profile,
                               const Environment& env) {
    const int N = profile.periods();
    if (schedule.periods != N)
        throw std::invalid_argument("backload: schedule horizon mismatch");
    for (int len = 1; len <= N; ++len)
        for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << len); ++bits)
            if (schedule.at(WorkHistory{len, bits}) < 0.0)
                throw std::invalid_argument("backload: negative interim payment at node \"" +
                                            WorkHistory{len, bits}.str() +
                                            "\" violates limited liability");

    // leaf table of path sums
    std::vector<double> leaf((std::size_t{1} << N), 0.0);
    for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << N); ++bits) {
        const WorkHistory w{N, bits};
        double s = 0.0;
        for (int t = 1; t <= N; ++t) s += schedule.at(w.prefix(t));
        leaf[bits] = s;
    }
    BackloadResult out{Mechanism::from_leaf_table(profile, std::move(leaf))};

    // payoff of the interim-paid version: alpha E[#work] - sum of node-weighted payments
    const CostDistribution& d = env.dist;
    double pay_expect = 0.0;
    {
        struct Frame {
            WorkHistory w;
            double prob;
        };
        std::vector<Frame> stack{{WorkHistory::empty(), 1.0}};
        while (!stack.empty()) {
            Frame fr = stack.back();
            stack.pop_back();
            if (fr.w.length >= 1) pay_expect += fr.prob * schedule.at(fr.w);
            if (fr.w.length == N) continue;
            const double F = d.cdf(profile.cutoff(fr.w));
            if (F > 0.0) stack.push_back({fr.w.append(true), fr.prob * F});
            if (F < 1.0) stack.push_back({fr.w.append(false), fr.prob * (1.0 - F)});
        }
    }
    Mechanism dummy = out.mechanism;  // same action rules
    out.payoff_before = env.alpha * expected_work(dummy, d) - pay_expect;
    out.payoff_after = principal_payoff(out.mechanism, env);

    // min interim IR slack before: future payments only (earned ones are gone)
    // W_int(v) = E[sum_{i>len} pay_i - future costs | v]
    std::vector<double> Wint((std::size_t{2} << N) - 1, 0.0);
    for (int len = N - 1; len >= 0; --len) {
        for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << len); ++bits) {
            const WorkHistory w{len, bits};
            const double c = profile.cutoff(w);
            const double F = d.cdf(c);
            const WorkHistory w1 = w.append(true), w0 = w.append(false);
            const double work_cost = c * F - d.cdf_integral(c);
            Wint[ThresholdProfile::index(w)] =
                -work_cost + F * (schedule.at(w1) + Wint[ThresholdProfile::index(w1)]) +
                (1.0 - F) * (schedule.at(w0) + Wint[ThresholdProfile::index(w0)]);
        }
    }
    const double hi = d.hi();
    bool first = true;
    double min_before = 0.0;
    {
        struct Frame {
            WorkHistory w;
        };
        std::vector<Frame> stack{{WorkHistory::empty()}};
        while (!stack.empty()) {
            const WorkHistory w = stack.back().w;
            stack.pop_back();
            const double c = profile.cutoff(w);
            const double F = d.cdf(c);
            const WorkHistory next = w.append(hi <= c);
            const double u = (hi <= c ? -hi : 0.0) + schedule.at(next) +
                             Wint[ThresholdProfile::index(next)];
            if (first || u < min_before) min_before = u, first = false;
            if (w.length < N - 1) {
                if (F > 0.0) stack.push_back({w.append(true)});
                if (F < 1.0) stack.push_back({w.append(false)});
            }
        }
    }
    out.min_slack_before = min_before;
    out.min_slack_after = check_interim_ir(out.mechanism, env).min_slack;
    return out;
}

}  // namespace screenlab
