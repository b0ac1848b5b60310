#include "doctest.h"

#include <cmath>
#include <random>

#include "nonlocal/solver.hpp"

using namespace nonlocal;

namespace {

GridFunction affine_data(const Grid& g)
{
    ProfileParams pp;
    return sample_profile(Profile::make(ProfileFamily::affine, pp), g);
}

double sup_diff(const GridFunction& a, const GridFunction& b, const DomainMask& om)
{
    double m = 0.0;
    for (std::size_t i : om.nodes()) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("energy basics")
{
    Grid g(1, 2.0, 41);
    FracParams fp(0.5, 2.0, 1);
    auto om = DomainMask::ball(g, 1.0);
    auto c = constant_function(g, 0.3);
    DiscreteEnergy E(om, c, constant_function(g, 0.0), fp);
    CHECK(energy(c, E) == 0.0);
    for (double x : energy_gradient(c, E)) CHECK(x == 0.0);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> v = c.values();
        for (std::size_t i : om.nodes()) v[i] = U(rng);
        CHECK(energy(c.with_values(v), E) >= 0.0);
    }

    for (std::size_t i : om.nodes())
        for (std::size_t j : om.nodes()) {
            CHECK(E.weight(i, j) == E.weight(j, i));
            CHECK(E.weight(i, j) >= 0.0);
        }
    CHECK(E.weight(om.nodes()[0], om.nodes()[0]) == 0.0);

    Grid other(1, 2.0, 43);
    CHECK_THROWS(energy(constant_function(other, 0.0), E));
}

TEST_CASE("gradient matches central differences of the energy")
{
    std::mt19937 rng(11);
    std::normal_distribution<double> N(0.0, 1.0);
    for (double p : {1.5, 2.0, 3.0}) {
        Grid g(1, 2.0, 65);
        FracParams fp(0.5, p, 1);
        auto om = DomainMask::ball(g, 1.0);
        auto data = constant_function(g, 0.25);
        DiscreteEnergy E(om, data, constant_function(g, 1.0), fp);
        for (int trial = 0; trial < 10; ++trial) {
            auto v = data.values();
            for (std::size_t i : om.nodes()) v[i] = N(rng);
            auto grad = E.gradient(v);
            double worst = 0.0, scale = 0.0;
            for (double x : grad) scale = std::max(scale, std::abs(x));
            for (std::size_t s = 0; s < E.interior().size(); ++s) {
                const std::size_t i = E.interior()[s];
                const double h = 1e-6 * std::max(1.0, std::abs(v[i]));
                auto vp = v, vm = v;
                vp[i] += h;
                vm[i] -= h;
                double fd = (E.energy(vp) - E.energy(vm)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - grad[s]) / scale);
            }
            CHECK(worst < 1e-5);
        }
    }
}

TEST_CASE("gradient sign probe")
{
    Grid g(1, 2.0, 41);
    FracParams fp(0.5, 1.5, 1);
    auto om = DomainMask::ball(g, 1.0);
    DiscreteEnergy E(om, constant_function(g, 0.0), constant_function(g, 0.0), fp);
    auto v = constant_function(g, 0.0).values();
    const std::size_t s = E.interior().size() / 2;
    v[E.interior()[s]] = 1.0;
    CHECK(E.gradient(v)[s] > 0.0);
}

TEST_CASE("minimizer of the affine problem")
{
    // x is the discrete solution up to the asymmetric far field; perturbations raise the energy
    Grid g(1, 2.0, 81);
    FracParams fp(0.9, 2.0, 1);
    auto om = DomainMask::ball(g, 1.0);
    auto x = affine_data(g);
    auto sol = solve_dirichlet(constant_function(g, 0.0), x, om, fp);
    REQUIRE(sol.report.converged);
    DiscreteEnergy E(om, x, constant_function(g, 0.0), fp);
    const double J = energy(sol.u, E);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-0.05, 0.05);
    std::uniform_int_distribution<std::size_t> pick(0, om.count() - 1);
    for (int t = 0; t < 20; ++t) {
        auto v = sol.u.values();
        const double c = g.coord(om.nodes()[pick(rng)])[0], amp = U(rng), w = 0.2;
        for (std::size_t i : om.nodes()) v[i] += amp * std::max(0.0, 1.0 - std::abs(g.coord(i)[0] - c) / w);
        CHECK(energy(sol.u.with_values(v), E) >= J);
    }
    CHECK(sup_diff(sol.u, x, om) < 1e-3);
}

TEST_CASE("constant data gives the constant solution")
{
    for (double p : {1.5, 2.0, 3.0}) {
        Grid g(1, 2.0, 41);
        auto om = DomainMask::ball(g, 1.0);
        auto c = constant_function(g, 0.7);
        SolverConfig cfg;
        std::vector<double> init(g.size(), 0.0);
        cfg.initial = init;
        auto r = solve_dirichlet(constant_function(g, 0.0), c, om, FracParams(0.5, p, 1), cfg);
        CHECK(r.report.converged);
        // a residual tolerance τ pins values to about τ^{1/(p-1)}
        CHECK(sup_diff(r.u, c, om) < 10.0 * std::pow(r.report.tolerance, 1.0 / (p - 1.0)));
    }
}

TEST_CASE("linear data is recovered under refinement")
{
    FracParams fp(0.9, 3.0, 1);
    double prev = INFINITY;
    for (int m : {65, 129, 257}) {
        Grid g(1, 2.0, m);
        auto om = DomainMask::ball(g, 1.0);
        auto x = affine_data(g);
        auto r = solve_dirichlet(constant_function(g, 0.0), x, om, fp);
        CHECK(r.report.converged);
        double err = sup_diff(r.u, x, om);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 5e-2);
}

TEST_CASE("energy decreases along the iteration and the solve reports")
{
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    auto r = solve_dirichlet(constant_function(g, 1.0), constant_function(g, 0.0), om, FracParams(0.6, 1.5, 1));
    CHECK(r.report.converged);
    CHECK(r.report.gradient_sup <= r.report.tolerance);
    CHECK(r.report.tolerance == doctest::Approx(1e-6));
    for (std::size_t k = 1; k < r.report.energy_history.size(); ++k)
        CHECK(r.report.energy_history[k] <= r.report.energy_history[k - 1]);

    SolverConfig tight;
    tight.max_iterations = 2;
    auto r2 = solve_dirichlet(constant_function(g, 1.0), constant_function(g, 0.0), om, FracParams(0.6, 1.5, 1), tight);
    CHECK_FALSE(r2.report.converged);
    CHECK(r2.report.status == "iteration budget exhausted");
}

TEST_CASE("uniqueness from random starts")
{
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    FracParams fp(0.5, 3.0, 1);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    std::vector<GridFunction> sols;
    for (int t = 0; t < 2; ++t) {
        SolverConfig cfg;
        std::vector<double> init(g.size());
        for (double& x : init) x = U(rng);
        cfg.initial = init;
        auto r = solve_dirichlet(constant_function(g, 1.0), constant_function(g, 0.5), om, fp, cfg);
        CHECK(r.report.converged);
        sols.push_back(r.u);
    }
    CHECK(sup_diff(sols[0], sols[1], om) < 10.0 * 1e-8);
}

TEST_CASE("radial symmetry is exact")
{
    Grid g(2, 1.5, 25);
    auto om = DomainMask::ball(g, 1.0);
    ProfileParams pp;
    pp.inner = 0.5;
    pp.outer = 1.2;
    auto data = sample_profile(Profile::make(ProfileFamily::smooth_step, pp), g);
    GridFunction gdata(g, data.values(), ConstantTail{1.0});
    auto r = solve_dirichlet(constant_function(g, 1.0), gdata, om, FracParams(0.5, 2.0, 2));
    CHECK(r.report.converged);
    const int m = g.m();
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto mi = g.multi_index(i);
        CHECK(r.u[g.index({m - 1 - mi[0], mi[1], 0})] == r.u[i]);
        CHECK(r.u[g.index({mi[0], m - 1 - mi[1], 0})] == r.u[i]);
        CHECK(r.u[g.index({mi[1], mi[0], 0})] == doctest::Approx(r.u[i]).epsilon(1e-7));
    }
}

TEST_CASE("discrete maximum principle")
{
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    for (double p : {1.5, 2.0, 3.0}) {
        auto x = affine_data(g);
        std::vector<double> v = x.values();
        for (double& t : v) t = std::clamp(t, -1.5, 1.5);
        GridFunction gd(g, v, ConstantTail{0.0});
        auto r = solve_dirichlet(constant_function(g, 0.0), gd, om, FracParams(0.5, p, 1));
        for (std::size_t i : om.nodes()) {
            CHECK(r.u[i] <= 1.5);
            CHECK(r.u[i] >= -1.5);
        }
    }
}

TEST_CASE("obstacle problem")
{
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    FracParams fp(0.5, 2.0, 1);

    auto c = constant_function(g, 0.4);
    auto rc = solve_obstacle(c, constant_function(g, 0.0), om, fp);
    CHECK(sup_diff(rc.u, c, om) < 1e-10);

    // a bump obstacle with a negative source: the constraint is active near the bump only
    ProfileParams pp;
    pp.beta = 1.0;
    pp.radius = 0.5;
    auto bump = sample_profile(Profile::make(ProfileFamily::cone, pp), g);
    auto f = constant_function(g, -2.0);
    auto r = solve_obstacle(bump, f, om, fp);
    CHECK(r.report.converged);
    DiscreteEnergy E(om, bump, f, fp);
    auto grad = E.gradient(r.u.values());
    const double tol = r.report.tolerance;
    int active = 0, free_nodes = 0;
    for (std::size_t s = 0; s < E.interior().size(); ++s) {
        const std::size_t i = E.interior()[s];
        CHECK(r.u[i] >= bump[i]);
        if (r.u[i] > bump[i] + tol) {
            ++free_nodes;
            CHECK(std::abs(grad[s]) / E.cell_volume() <= tol);
        } else {
            ++active;
            CHECK(grad[s] / E.cell_volume() >= -tol);
        }
    }
    CHECK(active > 0);
    CHECK(free_nodes > 0);

    auto below = solve_obstacle(bump.negated(), f.negated(), om, fp, ObstacleSide::below);
    for (std::size_t i : om.nodes()) {
        CHECK(below.u[i] <= -bump[i]);
        CHECK(below.u[i] == doctest::Approx(-r.u[i]).epsilon(1e-12));
    }
}

TEST_CASE("comparison checks")
{
    Grid g(1, 2.0, 65);
    auto om = DomainMask::ball(g, 1.0);
    FracParams fp(0.75, 2.0, 1);
    auto zero = constant_function(g, 0.0), one = constant_function(g, 1.0);
    auto x = affine_data(g);

    auto u = solve_dirichlet(zero, x, om, fp).u;
    auto v = solve_dirichlet(one, x, om, fp).u;
    auto rep = comparison_check(u, v, zero, one, om, 1e-7);
    CHECK(rep.verdict);
    CHECK(rep.data.at("min_difference") >= 0.0);

    auto same = comparison_check(u, u, zero, zero, om, 1e-7);
    CHECK(same.verdict);
    CHECK(same.data.at("min_difference") == 0.0);

    // g + 1: v >= u and v <= u + 1
    std::vector<double> shifted = x.values();
    for (double& t : shifted) t += 1.0;
    ProfileParams pp;
    pp.offset = 1.0;
    GridFunction x1(g, shifted, ProfileTail{Profile::make(ProfileFamily::affine, pp)});
    auto w = solve_dirichlet(zero, x1, om, fp).u;
    CHECK(comparison_check(u, w, zero, zero, om, 1e-7).verdict);
    std::vector<double> up = u.values();
    for (double& t : up) t += 1.0;
    GridFunction u1(g, up, ProfileTail{Profile::make(ProfileFamily::affine, pp)});
    CHECK(comparison_check(w, u1, zero, zero, om, 1e-7).verdict);

    auto bad = comparison_check(v, u, one, zero, om, 1e-7);
    CHECK_FALSE(bad.verdict);
    CHECK(bad.data.at("applicable") == 0.0);
}

TEST_CASE("Caccioppoli ratio of a solved torsion problem is stable under refinement")
{
    FracParams fp(0.5, 2.0, 1);
    double ratio[2];
    int k = 0;
    for (int m : {65, 129}) {
        Grid g(1, 2.0, m);
        auto om = DomainMask::ball(g, 1.0);
        auto f = constant_function(g, 1.0);
        auto u = solve_dirichlet(f, constant_function(g, 0.0), om, fp).u;
        auto rep = caccioppoli_gap(u, f, 0.5, 1.0, fp, quadrature_preset("standard"));
        ratio[k] = rep.data.at("ratio");
        CHECK(std::isfinite(ratio[k]));
        CHECK(rep.data.at("constant") == doctest::Approx(std::pow(2.0, 2.0)));
        ++k;
    }
    CHECK(std::abs(ratio[1] - ratio[0]) < 0.2 * ratio[0]);
}
