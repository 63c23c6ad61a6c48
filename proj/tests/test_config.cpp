#include <catch2/catch_amalgamated.hpp>

#include "screenlab/config.hpp"
#include "screenlab/serialize.hpp"
#include "screenlab/solver.hpp"

using namespace screenlab;

TEST_CASE("config parsing") {
    const std::string text = R"(
# demo run
[dist]
kind = uniform
lo = 1.0
hi = 2.0

[problem]
n = 2
alpha = 2.0

[sim]
n_paths = 1000
seed = 7
)";
    const RunConfig cfg = RunConfig::parse(text);
    CHECK(cfg.get_string("dist.kind") == "uniform");
    CHECK(cfg.get_double("problem.alpha") == 2.0);
    CHECK(cfg.periods() == 2);
    CHECK(cfg.get_int("sim.n_paths") == 1000);
    CHECK(cfg.get_int("sim.theta_grid", 7) == 7);  // fallback
    const CostDistribution d = cfg.dist();
    CHECK(d.lo() == 1.0);
    CHECK(d.hi() == 2.0);
}

TEST_CASE("dotted keys work without sections") {
    const RunConfig cfg = RunConfig::parse("dist.kind = uniform\ndist.lo = 0\ndist.hi = 1\n");
    CHECK(cfg.get_string("dist.kind") == "uniform");
}

TEST_CASE("config rejections") {
    CHECK_THROWS_AS(RunConfig::parse("mystery = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[dist]\nkindd = uniform\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[dist]\nkind = uniform\nkind = uniform\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[dist\nkind = uniform\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[dist]\nkind uniform\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[problem]\nalpha = abc\n").get_double("problem.alpha"),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[problem]\nn = 1.5\n").periods(), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("").get_string("dist.kind"), ConfigError);
}

TEST_CASE("distribution kinds") {
    const RunConfig tn = RunConfig::parse(
        "[dist]\nkind = truncnorm\nlo = 1\nhi = 2\nmu = 1.5\nsigma = 1\n");
    CHECK(tn.dist().name() == "truncnorm");
    const RunConfig sb =
        RunConfig::parse("[dist]\nkind = scaledbeta\nlo = 1\nhi = 2\na = 2\nb = 2\n");
    CHECK(sb.dist().name() == "scaledbeta");
    CHECK_THROWS_AS(RunConfig::parse("[dist]\nkind = cauchy\nlo = 0\nhi = 1\n").dist(),
                    ConfigError);
}

TEST_CASE("alpha grids") {
    const RunConfig g = RunConfig::parse("[problem]\nalpha_grid = 2.0, 2.5,3.0\n");
    CHECK(g.alpha_grid() == std::vector<double>{2.0, 2.5, 3.0});

    const RunConfig r =
        RunConfig::parse("[problem]\nalpha_min = 2\nalpha_max = 3\nalpha_count = 5\n");
    const auto grid = r.alpha_grid();
    REQUIRE(grid.size() == 5);
    CHECK(grid.front() == 2.0);
    CHECK(grid.back() == 3.0);

    CHECK_THROWS_AS(RunConfig::parse("[problem]\nn = 2\n").alpha_grid(), ConfigError);
}

TEST_CASE("sweep CSV shape") {
    const auto d = make_uniform(1.0, 2.0);
    const auto rows = sweep_alpha(d, 2, {2.0, 3.0});
    const std::string csv = sweep_to_csv(rows, 2);
    CHECK(csv.rfind("alpha,regime,V_star,V_aw,c1,c2,expected_work\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("consecutive_menu") != std::string::npos);
    CHECK(csv.find("always_working") != std::string::npos);
}

TEST_CASE("solve report serialization has stable keys") {
    const auto d = make_uniform(1.0, 2.0);
    const SolveReport rep = solve(Environment(d, 2, 2.0));
    const ordered_json j = solve_report_to_json(rep);
    CHECK(j.at("regime") == "consecutive_menu");
    CHECK(j.contains("start_cutoffs"));
    CHECK(j.contains("V_star"));
    CHECK(j.contains("feasibility"));
    const std::string once = j.dump(2);
    CHECK(solve_report_to_json(solve(Environment(d, 2, 2.0))).dump(2) == once);
}
