#include "doctest.h"

#include <cmath>

#include "nonlocal/barriers.hpp"
#include "nonlocal/perron.hpp"

using namespace nonlocal;

namespace {

GridFunction affine_data(const Grid& g)
{
    ProfileParams pp;
    return sample_profile(Profile::make(ProfileFamily::affine, pp), g);
}

GridFunction cone_data(const Grid& g)
{
    ProfileParams pp;
    return sample_profile(Profile::make(ProfileFamily::cone, pp), g);
}

double sup_diff(const GridFunction& a, const GridFunction& b, const DomainMask& om)
{
    double m = 0.0;
    for (std::size_t i : om.nodes()) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("Poisson modification keeps solutions and lowers supersolutions")
{
    FracParams fp(0.75, 2.0, 1);
    Grid g(1, 2.0, 129);
    auto om = DomainMask::ball(g, 1.0);
    auto zero = constant_function(g, 0.0);
    auto D = DomainMask::ball(g, 0.5, {0.2, 0.0, 0.0});

    auto sol = solve_dirichlet(zero, cone_data(g), om, fp);
    auto same = poisson_modify(sol.u, D, zero, fp);
    CHECK(sup_diff(same.u, sol.u, om) < 1e-7);

    auto v = solve_obstacle(cone_data(g), zero, om, fp).u;
    auto P = poisson_modify(v, D, zero, fp);
    double drop = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!D.contains(i)) CHECK(P.u[i] == v[i]);
        CHECK(P.u[i] <= v[i] + 1e-8);
        drop = std::max(drop, v[i] - P.u[i]);
    }
    CHECK(drop > 1e-2);

    CHECK_THROWS_AS(poisson_modify(v, DomainMask::from_flags(g, std::vector<char>(g.size(), 1)), zero, fp),
                    std::invalid_argument);
}

TEST_CASE("modifications on disjoint sets are local but do not commute")
{
    FracParams fp(0.75, 2.0, 1);
    Grid g(1, 2.0, 129);
    auto om = DomainMask::ball(g, 1.0);
    auto zero = constant_function(g, 0.0);
    auto v = solve_obstacle(cone_data(g), zero, om, fp).u;
    auto D1 = DomainMask::ball(g, 0.3, {-0.5, 0.0, 0.0});
    auto D2 = DomainMask::ball(g, 0.3, {0.5, 0.0, 0.0});
    auto a = poisson_modify(poisson_modify(v, D1, zero, fp).u, D2, zero, fp).u;
    auto b = poisson_modify(poisson_modify(v, D2, zero, fp).u, D1, zero, fp).u;
    double diff = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!D1.contains(i) && !D2.contains(i)) {
            CHECK(a[i] == v[i]);
            CHECK(b[i] == v[i]);
        }
        CHECK(a[i] <= v[i] + 1e-8);
        CHECK(b[i] <= v[i] + 1e-8);
        diff = std::max(diff, std::abs(a[i] - b[i]));
    }
    // the second solve sees the first one's interior values through the kernel
    CHECK(diff > 1e-4);
}

TEST_CASE("envelopes of constant data are the constant")
{
    FracParams fp(0.6, 2.0, 1);
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    auto zero = constant_function(g, 0.0);
    auto c = constant_function(g, 0.375);
    auto up = upper_perron(c, zero, om, fp);
    auto lo = lower_perron(c, zero, om, fp);
    CHECK(up.sweeps == 1);
    CHECK(lo.sweeps == 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(up.u[i] == doctest::Approx(0.375).epsilon(1e-12));
        CHECK(lo.u[i] == doctest::Approx(0.375).epsilon(1e-12));
    }
    auto rep = resolutivity_gap(c, zero, om, fp);
    CHECK(rep.gap <= 2.0 * rep.tolerance);
}

TEST_CASE("upper envelope sits below its obstacle start and matches the direct solve")
{
    FracParams fp(0.75, 2.0, 1);
    Grid g(1, 2.0, 129);
    auto om = DomainMask::ball(g, 1.0);
    auto zero = constant_function(g, 0.0);
    auto data = cone_data(g);
    auto env = upper_perron(data, zero, om, fp);
    CHECK(env.converged);
    auto start = solve_obstacle(data, zero, om, fp).u;
    for (std::size_t i : om.nodes()) CHECK(env.u[i] <= start[i] + env.monotone_tolerance);
    for (const LevelLog& row : env.log) CHECK(row.wrong_way <= env.monotone_tolerance);
    // the exhaustion has the three erosions and the domain itself
    CHECK(env.log.size() % 4 == 0);

    auto direct = solve_dirichlet(zero, data, om, fp);
    CHECK(sup_diff(env.u, direct.u, om) < env.monotone_tolerance);
}

TEST_CASE("lower envelope is the odd image of the upper one")
{
    FracParams fp(0.6, 1.5, 1);
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    auto data = cone_data(g);
    auto f = constant_function(g, 0.5);
    auto up = upper_perron(data, f, om, fp);
    auto lo = lower_perron(data.negated(), f.negated(), om, fp);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(lo.u[i] == -up.u[i]);

    auto lo2 = lower_perron(data, f, om, fp);
    for (std::size_t i : om.nodes()) CHECK(lo2.u[i] <= up.u[i] + up.monotone_tolerance);
}

TEST_CASE("resolutivity on a ball with linear data")
{
    FracParams fp(0.9, 2.0, 1);
    PerronProblem pb;
    pb.g = affine_data;
    pb.f = [](const Grid& g) { return constant_function(g, 0.0); };
    pb.omega = [](const Grid& g) { return DomainMask::ball(g, 1.0); };
    auto rep = resolutivity_study(pb, 1, 2.0, {65, 129, 257}, fp);
    REQUIRE(rep.refinement.size() == 3);
    CHECK(rep.converged);
    CHECK(rep.gap_decreasing);
    CHECK(rep.gap < 1e-4);
    CHECK(rep.direct_difference < rep.tolerance);
    CHECK(rep.ordering_slack >= -rep.tolerance);
}

TEST_CASE("envelopes obey the cutoff supersolution bound")
{
    // u <= max g + (sup|f| / margin)^{1/(p-1)} with the cutoff at radius R covering Ω
    for (double p : {1.5, 2.0, 3.0}) {
        FracParams fp(0.6, p, 1);
        Grid g(1, 2.0, 65);
        auto om = DomainMask::ball(g, 1.0);
        auto data = constant_function(g, 0.0);
        auto f = constant_function(g, 1.0);
        double margin = cutoff_supersolution_margin(1.0, fp).margin;
        double bound = std::pow(1.0 / margin, 1.0 / (p - 1.0));
        auto rep = resolutivity_gap(data, f, om, fp);
        for (std::size_t i : om.nodes()) {
            CHECK(rep.upper[i] <= bound);
            CHECK(rep.lower[i] >= -rep.tolerance);
        }
    }
}
