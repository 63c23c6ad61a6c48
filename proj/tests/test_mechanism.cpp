#include <catch2/catch_amalgamated.hpp>

#include "screenlab/mechanism.hpp"
#include "screenlab/serialize.hpp"
#include "screenlab/sim.hpp"
#include "screenlab/solver.hpp"

using namespace screenlab;
using Catch::Matchers::WithinAbs;

namespace {

// Independent oracle for u1*: enumerate every (t, w_{t-1}) candidate and
// accumulate S directly from the definition, without the DFS sharing.
double u1_oracle(const ThresholdProfile& p, const CostDistribution& d) {
    double min_s = 0.0;
    for (int t = 1; t <= p.periods(); ++t) {
        for (const WorkHistory& w : histories_of_length(t - 1, p.periods())) {
            if (path_probability(p, d, w) <= 0.0) continue;
            double s = 0.0;
            for (int i = 1; i <= t - 1; ++i)
                if (w.worked(i - 1)) s += p.cutoff(w.prefix(i - 1));
            for (int i = 2; i <= t; ++i) s -= d.cdf_integral(p.cutoff(w.prefix(i - 1)));
            min_s = std::min(min_s, s);
        }
    }
    return -min_s;
}

ThresholdProfile menu_profile(const std::vector<double>& start, const CostDistribution& d) {
    return ConsecMenu{start}.expand(d);
}

}  // namespace

TEST_CASE("u1* of canonical profiles") {
    const auto d01 = make_uniform(0.0, 1.0);

    SECTION("always working gives zero rent") {
        const auto p = ThresholdProfile::constant(3, 1.0, d01.support());
        const U1Result r = u1_star(p, d01);
        CHECK(r.value == 0.0);
        REQUIRE_FALSE(r.argmin.empty());
        CHECK(r.argmin.front().first == 1);
    }
    SECTION("single period is always zero") {
        for (double c : {0.0, 0.3, 0.99, 1.0})
            CHECK(u1_star(ThresholdProfile(1, {c}, d01.support()), d01).value == 0.0);
    }
    SECTION("spec's two-period example, brute-forced over the candidate nodes") {
        const ThresholdProfile p(2, {0.6, 0.5, 0.5}, d01.support());
        const U1Result r = u1_star(p, d01);
        CHECK(r.value == u1_oracle(p, d01));
        CHECK_THAT(r.value, WithinAbs(0.125, 1e-15));  // I(0.5) along the all-shirk chain
        REQUIRE(r.argmin.size() == 1);
        CHECK(r.argmin[0].first == 2);
        CHECK(r.argmin[0].second.str() == "0");
        // the Lemma-3 variant (t <= N-1) misses the binding node
        CHECK(r.value_t_below_n == 0.0);
    }
    SECTION("matches the node-enumeration oracle on random profiles") {
        const rng::Counter rc(4242, 0);
        std::uint64_t k = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const int n = 1 + static_cast<int>(rc.u01(k++) * 4);
            std::vector<double> cutoffs(ThresholdProfile::node_count(n));
            for (double& c : cutoffs) c = rc.u01(k++);
            const ThresholdProfile p(n, cutoffs, d01.support());
            CHECK(u1_star(p, d01).value == u1_oracle(p, d01));
        }
    }
}

TEST_CASE("final payments") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 3, 2.0);

    SECTION("always-working pays thetabar + (N-1) E at the on-path leaf") {
        const auto [mech, v] = always_working(env);
        CHECK_THAT(mech.final_payment(d, WorkHistory::all_work(3)),
                   WithinAbs(2.0 + 2.0 * 1.5, 1e-12));
    }
    SECTION("consecutive menu start payments match the menu display") {
        const std::vector<double> start{1.7, 1.5, 1.3};
        const Mechanism m = Mechanism::menu_binding(menu_profile(start, d), d);
        // start at period t+1 after t shirks: c_{t+1} + (N-t-1)E + sum_{i>=t+2} I(c_i)
        const double i2 = d.cdf_integral(1.5), i3 = d.cdf_integral(1.3);
        CHECK_THAT(m.final_payment(d, WorkHistory::from_string("111")),
                   WithinAbs(1.7 + 2 * 1.5 + i2 + i3, 1e-12));
        CHECK_THAT(m.final_payment(d, WorkHistory::from_string("011")),
                   WithinAbs(1.5 + 1.5 + i3, 1e-12));
        CHECK_THAT(m.final_payment(d, WorkHistory::from_string("001")), WithinAbs(1.3, 1e-12));
        // binding all-shirk leaf pays exactly zero
        CHECK(m.final_payment(d, WorkHistory::from_string("000")) == 0.0);
    }
}

TEST_CASE("principal payoff") {
    SECTION("always-working closed form") {
        const auto d = make_uniform(0.0, 1.0);
        Environment env(d, 3, 1.5);
        const auto [mech, v] = always_working(env);
        CHECK_THAT(v, WithinAbs(2.5, 1e-12));
        CHECK_THAT(principal_payoff(mech, env), WithinAbs(2.5, 1e-12));
    }
    SECTION("one-period posted cutoff") {
        const auto d = make_uniform(0.0, 1.0);
        Environment env(d, 1, 1.0);
        const Mechanism m = Mechanism::from_profile(ThresholdProfile(1, {0.5}, d.support()), d);
        CHECK_THAT(principal_payoff(m, env), WithinAbs(0.25, 1e-12));
    }
    SECTION("never working pays and earns nothing") {
        const auto d = make_uniform(0.0, 1.0);
        Environment env(d, 3, 1.5);
        const Mechanism m =
            Mechanism::from_profile(ThresholdProfile::constant(3, 0.0, d.support()), d);
        CHECK(principal_payoff(m, env) == 0.0);
    }
}

TEST_CASE("interim utility and the envelope") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 3, 2.0);
    const std::vector<double> start{1.7, 1.5, 1.3};
    const Mechanism m = Mechanism::menu_binding(menu_profile(start, d), d);

    SECTION("top type in period one earns exactly u1*") {
        CHECK_THAT(agent_interim_utility(m, env, {1, WorkHistory::empty(), 2.0}),
                   WithinAbs(m.u1(), 1e-12));
    }
    SECTION("all-shirk worst case at t=N binds at zero") {
        CHECK_THAT(agent_interim_utility(m, env, {3, WorkHistory::from_string("00"), 2.0}),
                   WithinAbs(0.0, 1e-13));
    }
    SECTION("utility gaps equal the envelope integral of the action rule") {
        const rng::Counter rc(31, 2);
        std::uint64_t k = 0;
        for (int rep = 0; rep < 60; ++rep) {
            const int t = 1 + static_cast<int>(rc.u01(k++) * 3);
            WorkHistory w;
            for (int i = 1; i < t; ++i) w = w.append(rc.u01(k++) < 0.5);
            if (path_probability(m.profile(), d, w) <= 0.0) continue;
            const double theta = 1.0 + rc.u01(k++);
            const double c = m.profile().cutoff(w);
            const double u = agent_interim_utility(m, env, {t, w, theta});
            const double u_bar = agent_interim_utility(m, env, {t, w, 2.0});
            CHECK_THAT(u - u_bar, WithinAbs(std::max(c - theta, 0.0), 1e-9));
        }
    }
}

TEST_CASE("interim IR sweep") {
    SECTION("always working binds at t=1") {
        const auto d = make_uniform(1.0, 2.0);
        Environment env(d, 4, 2.5);
        const auto [mech, v] = always_working(env);
        const IrReport ir = check_interim_ir(mech, env);
        CHECK_THAT(ir.min_slack, WithinAbs(0.0, 1e-12));
        CHECK(ir.argmin_t == 1);
        CHECK_FALSE(ir.violated);
        // later all-work nodes have slack (t-1) E
        CHECK_THAT(agent_interim_utility(mech, env, {3, WorkHistory::all_work(2), 2.0}),
                   WithinAbs(2.0 * 1.5, 1e-12));
    }
    SECTION("interior menu binds on the all-shirk chain") {
        const auto d = make_uniform(1.0, 2.0);
        Environment env(d, 3, 2.0);
        const Mechanism m = Mechanism::menu_binding(menu_profile({1.7, 1.5, 1.3}, d), d);
        const IrReport ir = check_interim_ir(m, env);
        CHECK_THAT(ir.min_slack, WithinAbs(0.0, 1e-13));
        CHECK(ir.argmin_w.all_shirk_history());
        CHECK_FALSE(ir.violated);
        CHECK_FALSE(check_interim_ir(m, env, true).violated);  // paranoid grid agrees
    }
    SECTION("menu violating condition (4) shows the (0_t, 1 1) violation") {
        const auto d = make_uniform(0.0, 1.0);  // assumption 1 fails here
        Environment env(d, 2, 1.0);
        const Mechanism m = Mechanism::menu_binding(menu_profile({0.2, 0.4}, d), d);
        const IrReport ir = check_interim_ir(m, env);
        CHECK(ir.violated);
        // violating node is the first period after the start: w = "1" at t=2
        CHECK(ir.argmin_t == 2);
        CHECK(ir.argmin_w.str() == "1");
        // slack equals the condition-(4) margin for t=0
        const double margin = 0.2 + d.cdf_integral(0.4) + d.mean() - d.hi();
        CHECK_THAT(ir.min_slack, WithinAbs(margin, 1e-12));
    }
}

TEST_CASE("one-shot deviations") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 3, 2.0);
    const Mechanism m = Mechanism::menu_binding(menu_profile({1.7, 1.5, 1.3}, d), d);

    SECTION("indifference exactly at the cutoff") {
        const double c = 1.7;
        const double work = deviation_value(m, env, {1, WorkHistory::empty(), c}, true);
        const double shirk = deviation_value(m, env, {1, WorkHistory::empty(), c}, false);
        CHECK_THAT(work - shirk, WithinAbs(0.0, 1e-9));
    }
    SECTION("no shirk report exists under always-working") {
        const auto [aw, v] = always_working(env);
        const NodeState node{2, WorkHistory::from_string("1"), 1.4};
        const double truthful = agent_interim_utility(aw, env, node);
        CHECK(deviation_value(aw, env, node, false) == truthful);
    }
    SECTION("truth dominates on random nodes") {
        const rng::Counter rc(8, 8);
        std::uint64_t k = 0;
        for (int rep = 0; rep < 100; ++rep) {
            const int t = 1 + static_cast<int>(rc.u01(k++) * 3);
            WorkHistory w;
            for (int i = 1; i < t; ++i) {
                const double th = d.quantile(rc.u01(k++));
                w = w.append(th <= m.profile().cutoff(w));
            }
            const double theta = d.quantile(rc.u01(k++));
            const NodeState node{t, w, theta};
            const double truthful = agent_interim_utility(m, env, node);
            for (bool forced : {true, false})
                CHECK(truthful - deviation_value(m, env, node, forced) >= -1e-9);
        }
    }
}

TEST_CASE("backloading") {
    const auto d = make_uniform(1.0, 2.0);

    SECTION("paying the cutoff at work periods backloads to the same payoff") {
        Environment env(d, 2, 2.0);
        const ThresholdProfile p = menu_profile({1.6, 1.4}, d);
        InterimSchedule sched(2);
        for (int len = 1; len <= 2; ++len)
            for (const WorkHistory& w : histories_of_length(len, 2))
                if (w.worked(len - 1)) sched.at(w) = p.cutoff(w.prefix(len - 1));
        const BackloadResult r = backload(sched, p, env);
        CHECK_THAT(r.payoff_after, WithinAbs(r.payoff_before, 1e-12));
        CHECK(r.min_slack_after >= r.min_slack_before - 1e-12);
    }
    SECTION("zero schedule is the identity") {
        Environment env(d, 2, 2.0);
        const ThresholdProfile p = menu_profile({1.6, 1.4}, d);
        const BackloadResult r = backload(InterimSchedule(2), p, env);
        CHECK(r.payoff_before == r.payoff_after);
        for (const WorkHistory& w : histories_of_length(2, 2))
            CHECK(r.mechanism.final_payment(d, w) == 0.0);
    }
    SECTION("random nonnegative schedules on the N=3 tree") {
        Environment env(d, 3, 2.2);
        const rng::Counter rc(555, 0);
        std::uint64_t k = 0;
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> cutoffs(ThresholdProfile::node_count(3));
            for (double& c : cutoffs) c = 1.0 + rc.u01(k++);
            const ThresholdProfile p(3, cutoffs, d.support());
            InterimSchedule sched(3);
            for (int len = 1; len <= 3; ++len)
                for (const WorkHistory& w : histories_of_length(len, 3))
                    sched.at(w) = 2.0 * rc.u01(k++);
            const BackloadResult r = backload(sched, p, env);
            CHECK_THAT(r.payoff_after, WithinAbs(r.payoff_before, 1e-12));
            CHECK(r.min_slack_after >= r.min_slack_before - 1e-12);
        }
    }
    SECTION("negative interim payments are rejected") {
        Environment env(d, 2, 2.0);
        InterimSchedule sched(2);
        sched.at(WorkHistory::from_string("1")) = -0.1;
        CHECK_THROWS_AS(backload(sched, menu_profile({1.6, 1.4}, d), env),
                        std::invalid_argument);
    }
}

TEST_CASE("continuation statistics") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 3, 2.0);
    const std::vector<double> start{1.7, 1.5, 1.3};
    const Mechanism m = Mechanism::menu_binding(menu_profile(start, d), d);

    SECTION("leaves carry only the pending u1*") {
        for (const WorkHistory& w : histories_of_length(3, 3)) {
            const ContinuationStats cs = continuation_stats(m, env, w);
            CHECK(cs.expected_future_work == 0.0);
            CHECK(cs.pending_payment == m.u1());
            CHECK(cs.v_hat == -m.u1());
        }
    }
    SECTION("started subtrees work every remaining period") {
        for (int t = 1; t <= 3; ++t) {
            const WorkHistory w = WorkHistory::all_work(t);
            const ContinuationStats cs = continuation_stats(m, env, w);
            CHECK_THAT(cs.expected_future_work, WithinAbs(3.0 - t, 1e-12));
            // menu identity: V-hat after starting = (N-t)(alpha-E) - sum I
            CHECK_THAT(cs.v_hat, WithinAbs((3.0 - t) * (2.0 - 1.5) - m.u1(), 1e-12));
        }
    }
    SECTION("root V-hat is the principal payoff") {
        CHECK_THAT(continuation_stats(m, env, WorkHistory::empty()).v_hat,
                   WithinAbs(principal_payoff(m, env), 1e-12));
    }
}

TEST_CASE("payoff decomposition over start periods") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 3, 2.1);
    const std::vector<double> start{1.7, 1.5, 1.3};
    const Mechanism m = Mechanism::menu_binding(menu_profile(start, d), d);

    double v = 0.0, pr_shirk = 1.0;
    for (int t = 1; t <= 3; ++t) {
        const double F = d.cdf(start[t - 1]);
        double pay = start[t - 1] + (3.0 - t) * d.mean();
        for (int i = t + 1; i <= 3; ++i) pay += d.cdf_integral(start[i - 1]);
        v += pr_shirk * F * (env.alpha * (3.0 - t + 1.0) - pay);
        pr_shirk *= 1.0 - F;
    }
    CHECK_THAT(principal_payoff(m, env), WithinAbs(v, 1e-10));
}

TEST_CASE("limited liability on reachable leaves") {
    const auto d = make_uniform(1.0, 2.0);
    const rng::Counter rc(777, 1);
    std::uint64_t k = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 1 + static_cast<int>(rc.u01(k++) * 4);
        std::vector<double> cutoffs(ThresholdProfile::node_count(n));
        for (double& c : cutoffs) c = 1.0 + rc.u01(k++);
        const ThresholdProfile p(n, cutoffs, d.support());
        const Mechanism m = Mechanism::from_profile(p, d);
        for (const WorkHistory& w : histories_of_length(n, n))
            if (path_probability(p, d, w) > 0.0)
                CHECK(m.final_payment(d, w) >= -1e-10);
    }
}

TEST_CASE("u1* cache guards against profile mutation") {
    const auto d = make_uniform(1.0, 2.0);
    Environment env(d, 2, 2.0);
    Mechanism m = Mechanism::from_profile(menu_profile({1.6, 1.4}, d), d);
    CHECK_NOTHROW(principal_payoff(m, env));
    // the c2(0) cutoff feeds u1*, so editing it makes the cache stale
    m.mutable_profile().cutoff(WorkHistory::from_string("0")) = 1.9;
    CHECK_THROWS_AS(principal_payoff(m, env), std::runtime_error);
    CHECK_THROWS_AS(check_interim_ir(m, env), std::runtime_error);
}

TEST_CASE("mechanism JSON round trip") {
    const auto d = make_uniform(1.0, 2.0);
    const Mechanism m = Mechanism::menu_binding(menu_profile({1.63, 1.27}, d), d);
    const ordered_json j = mechanism_to_json(m);
    const Mechanism back = mechanism_from_json(j, d);
    CHECK(mechanism_to_json(back).dump() == j.dump());
    CHECK(back.u1() == m.u1());
    CHECK(back.profile() == m.profile());

    const Mechanism gen = Mechanism::from_profile(menu_profile({1.63, 1.27}, d), d);
    const ordered_json j2 = mechanism_to_json(gen);
    CHECK(mechanism_to_json(mechanism_from_json(j2, d)).dump() == j2.dump());
}
