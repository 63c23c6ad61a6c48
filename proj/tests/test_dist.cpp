#include <catch2/catch_amalgamated.hpp>

#include "screenlab/dist.hpp"
#include "screenlab/sim.hpp"

using namespace screenlab;
using Catch::Matchers::WithinAbs;

TEST_CASE("uniform closed forms") {
    const auto d = make_uniform(0.0, 1.0);
    CHECK(d.cdf_integral(1.0) == 0.5);
    CHECK(d.mean() == 0.5);
    CHECK(d.density(0.3) == 1.0);
    CHECK(d.cdf(0.25) == 0.25);

    const auto d12 = make_uniform(1.0, 2.0);
    CHECK(d12.mean() == 1.5);
    CHECK(d12.cdf_integral(2.0) == 0.5);
    CHECK_THAT(d12.cdf_integral(1.5), WithinAbs(0.125, 1e-15));

    CHECK_THROWS_AS(make_uniform(2.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(make_uniform(3.0, 1.0), std::invalid_argument);
}

TEST_CASE("truncated normal on [1,2], symmetric") {
    const auto d = make_truncated_normal(1.5, 1.0, 1.0, 2.0);
    CHECK_THAT(d.cdf(2.0), WithinAbs(1.0, 1e-12));
    CHECK(d.cdf(1.0) == 0.0);
    CHECK_THAT(d.mean(), WithinAbs(1.5, 1e-10));
    CHECK_THAT(d.cdf_integral(2.0), WithinAbs(2.0 - d.mean(), 1e-9));
    CHECK_THROWS_AS(make_truncated_normal(1.5, 0.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(make_truncated_normal(1.5, -1.0, 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("scaled beta basics") {
    const auto flat = make_scaled_beta(1.0, 1.0, 1.0, 2.0);
    CHECK_THAT(flat.cdf(1.25), WithinAbs(0.25, 1e-12));
    CHECK_THAT(flat.mean(), WithinAbs(1.5, 1e-12));

    const auto d = make_scaled_beta(2.0, 2.0, 0.0, 1.0);
    CHECK_THAT(d.mean(), WithinAbs(0.5, 1e-12));
    CHECK_THAT(d.cdf(0.5), WithinAbs(0.5, 1e-12));
    CHECK(d.cdf(0.3) < d.cdf(0.4));
    CHECK_THAT(d.cdf_integral(1.0), WithinAbs(1.0 - d.mean(), 1e-9));
    CHECK_THROWS_AS(make_scaled_beta(0.5, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("cdf integral matches direct quadrature at random points") {
    const rng::Counter rc(20240811, 0);
    int k = 0;
    for (const auto& d : {make_uniform(1.0, 2.0), make_truncated_normal(1.5, 1.0, 1.0, 2.0),
                          make_scaled_beta(2.0, 3.0, 1.0, 2.0)}) {
        for (int i = 0; i < 100; ++i) {
            const double x = d.lo() + d.support().width() * rc.u01(k++);
            const double direct = integrate([&](double t) { return d.cdf(t); }, d.lo(), x, 1e-12);
            CHECK_THAT(d.cdf_integral(x), WithinAbs(direct, 1e-9));
        }
        CHECK_THAT(d.cdf_integral(d.hi()) - (d.hi() - d.mean()), WithinAbs(0.0, 1e-9));
        CHECK(d.cdf_integral(d.lo()) == 0.0);
    }
}

TEST_CASE("assumption 1 is the sign of lo + mean - hi") {
    CHECK(check_assumption1(make_uniform(1.0, 2.0)));
    CHECK_FALSE(check_assumption1(make_uniform(0.0, 1.0)));
    CHECK(check_assumption1(make_uniform(1.0, 3.0)));  // equality counts as holding
}

TEST_CASE("assumption 2 for uniforms") {
    const auto d = make_uniform(1.0, 2.0);
    const auto rep3 = check_assumption2(d, 3);
    CHECK(rep3.a2_g_monotone);
    CHECK(rep3.a2_density_bound);  // f(hi)=1 equals the N=3 bound exactly

    const auto rep4 = check_assumption2(d, 4);
    CHECK(rep4.a2_g_monotone);
    CHECK_FALSE(rep4.a2_density_bound);

    // density bound for uniform holds iff N <= 3, any support
    for (const auto& u : {make_uniform(0.0, 1.0), make_uniform(2.0, 5.0)}) {
        for (int n = 2; n <= 6; ++n)
            CHECK(check_assumption2(u, n).a2_density_bound == (n <= 3));
    }
    CHECK_THROWS_AS(check_assumption2(d, 1), std::invalid_argument);
}

TEST_CASE("virtual cost and inverse") {
    const auto d01 = make_uniform(0.0, 1.0);
    CHECK_THAT(virtual_cost(d01, 0.5), WithinAbs(1.0, 1e-12));  // G = 2 theta
    const auto d12 = make_uniform(1.0, 2.0);
    CHECK_THAT(virtual_cost_inverse(d12, 2.0), WithinAbs(1.5, 1e-11));

    const double y = 1.2;
    CHECK_THAT(virtual_cost(d01, virtual_cost_inverse(d01, y)), WithinAbs(y, 1e-10));

    CHECK_THROWS_AS(virtual_cost_inverse(d01, 2.5), std::domain_error);
    CHECK_THROWS_AS(virtual_cost_inverse(d01, -0.5), std::domain_error);
    try {
        virtual_cost_inverse(d01, 2.5);
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("clamped endpoint") != std::string::npos);
    }
    CHECK(virtual_cost(d01, 0.0) == 0.0);  // 0/0 limit at the bottom of the support
}

TEST_CASE("quantile inverts the cdf") {
    const rng::Counter rc(7, 1);
    for (const auto& d : {make_uniform(1.0, 2.0), make_truncated_normal(1.4, 0.7, 1.0, 2.0)}) {
        for (int i = 0; i < 50; ++i) {
            const double u = rc.u01(i);
            CHECK_THAT(d.cdf(d.quantile(u)), WithinAbs(u, 1e-9));
        }
    }
}
