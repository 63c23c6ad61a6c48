// JSON/CSV encodings of the public artifacts. JSON uses ordered keys and
// shortest-round-trip doubles so a rerun overwrites identical bytes.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "screenlab/mechanism.hpp"
#include "screenlab/sim.hpp"
#include "screenlab/solver.hpp"
#include "screenlab/stochastic.hpp"

namespace screenlab {

using ordered_json = nlohmann::ordered_json;

// %.17g: round-trip decimal for CSV cells
inline std::string round_trip(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline ordered_json profile_to_json(const ThresholdProfile& p) {
    ordered_json cutoffs = ordered_json::object();
    for (int len = 0; len < p.periods(); ++len)
        for (std::uint32_t bits = 0; bits < (std::uint32_t{1} << len); ++bits) {
            const WorkHistory w{len, bits};
            cutoffs[w.str()] = p.cutoff(w);
        }
    return ordered_json{{"N", p.periods()}, {"cutoffs", cutoffs}};
}

inline ThresholdProfile profile_from_json(const ordered_json& j, const Support& support) {
    const int N = j.at("N").get<int>();
    std::vector<double> cutoffs(ThresholdProfile::node_count(N), support.hi);
    for (const auto& [key, val] : j.at("cutoffs").items()) {
        const WorkHistory w = WorkHistory::from_string(key);
        cutoffs[ThresholdProfile::index(w)] = val.get<double>();
    }
    return ThresholdProfile(N, std::move(cutoffs), support);
}

inline ordered_json mechanism_to_json(const Mechanism& m) {
    if (m.pay_mode() != Mechanism::PayMode::RevenueEquivalence || m.tampered())
        throw std::invalid_argument("mechanism_to_json: only pristine revenue-equivalence "
                                    "mechanisms serialize");
    ordered_json j = profile_to_json(m.profile());
    j["u1_star"] = m.u1();
    return j;
}

inline Mechanism mechanism_from_json(const ordered_json& j, const CostDistribution& d) {
    ThresholdProfile p = profile_from_json(j, d.support());
    Mechanism m = Mechanism::from_profile(std::move(p), d);
    if (j.contains("u1_star")) {
        const double stored = j.at("u1_star").get<double>();
        if (stored != m.u1()) {
            // menu-binding serialization stores the Def.-3 value instead
            Mechanism mb = Mechanism::menu_binding(profile_from_json(j, d.support()), d);
            if (stored != mb.u1())
                throw std::runtime_error("mechanism_from_json: stored u1* matches neither "
                                         "construction; refusing stale payments");
            return mb;
        }
    }
    return m;
}

inline ordered_json solve_report_to_json(const SolveReport& r) {
    ordered_json j;
    j["regime"] = regime_name(r.regime);
    if (r.menu) j["start_cutoffs"] = r.menu->start_cutoffs;
    j["u1_star"] = r.u1_star;
    j["V_star"] = r.v_star;
    j["V_aw"] = r.v_aw;
    if (std::isfinite(r.v_cm)) j["V_cm"] = r.v_cm;
    j["foc_residual"] = r.foc_residual;
    j["foc_degenerate"] = r.foc_degenerate;
    j["degraded"] = r.degraded;
    j["feasibility"] = ordered_json{{"assumption1", r.assumption1},
                                    {"condition4", r.condition4},
                                    {"lemma_interior", r.lemma_interior}};
    if (std::isfinite(r.condition4_margin)) j["condition4_margin"] = r.condition4_margin;
    j["ir_min_slack"] = r.ir_min_slack;
    j["expected_work"] = r.expected_work;
    j["distinct_newton_roots"] = r.distinct_roots;
    return j;
}

inline ordered_json sim_result_to_json(const SimResult& r) {
    ordered_json q = ordered_json::array();
    for (const auto& [p, v] : r.agent_quantiles) q.push_back(ordered_json{{"p", p}, {"value", v}});
    return ordered_json{{"n_paths", r.n_paths},
                        {"seed", r.seed},
                        {"mean_principal", r.mean_principal},
                        {"stderr_principal", r.stderr_principal},
                        {"mean_agent", r.mean_agent},
                        {"stderr_agent", r.stderr_agent},
                        {"start_frequency", r.start_frequency},
                        {"agent_payoff_quantiles", q},
                        {"agent_negative_share", r.agent_negative_share}};
}

inline ordered_json alpha_hat_to_json(const AlphaHatResult& r) {
    ordered_json samples = ordered_json::array();
    for (const auto& [a, g] : r.crossing_samples)
        samples.push_back(ordered_json{{"alpha", a}, {"gap", g}});
    return ordered_json{{"alpha_hat", r.alpha_hat},
                        {"bracket", {r.bracket_lo, r.bracket_hi}},
                        {"gap_at_hat", r.gap_at_hat},
                        {"at_base", r.at_base},
                        {"single_crossing", r.single_crossing},
                        {"crossing_samples", samples}};
}

// sweep CSV: alpha, regime, V_star, V_aw, c1..cN, expected_work
inline std::string sweep_to_csv(const std::vector<SweepRow>& rows, int N) {
    std::string out = "alpha,regime,V_star,V_aw";
    for (int t = 1; t <= N; ++t) out += ",c" + std::to_string(t);
    out += ",expected_work\n";
    for (const SweepRow& r : rows) {
        out += round_trip(r.alpha);
        out += ",";
        out += regime_name(r.regime);
        out += "," + round_trip(r.v_star) + "," + round_trip(r.v_aw);
        for (double c : r.start_cutoffs) out += "," + round_trip(c);
        out += "," + round_trip(r.expected_work) + "\n";
    }
    return out;
}

}  // namespace screenlab
