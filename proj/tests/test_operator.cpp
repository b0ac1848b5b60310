#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "nonlocal/operator.hpp"

using namespace nonlocal;

namespace {

const QuadratureSpec Q = quadrature_preset("standard");

double gk(const std::function<double(double)>& f, double a, double b)
{
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

// independent PV evaluation of L (x_+)^beta at x > 0: left half-line, paired [0, x], tail beyond 2x.
// On [0, h0] the paired integrand is 2(p-1) a^{p-2} b h^{p-1-q} (1 + O(h²)) with a, b the Taylor coefficients of y^beta.
double oracle_power_profile(double beta, double xd, double pd, double qd)
{
    using GKL = boost::math::quadrature::gauss_kronrod<long double, 61>;
    const long double x = xd, p = pd, q = qd, h0 = 1e-4L * x;
    auto phi = [p](long double t) { return std::copysign(std::pow(std::abs(t), p - 1.0L), t); };
    const long double xb = std::pow(x, (long double)beta);
    const long double a = beta * std::pow(x, beta - 1.0L), b = 0.5L * beta * (beta - 1.0L) * std::pow(x, beta - 2.0L);
    long double left = phi(-xb) * std::pow(x, -q) / q;
    long double inner = 2.0L * (p - 1.0L) * std::pow(a, p - 2.0L) * b * std::pow(h0, p - q) / (p - q);
    auto pair = [&](long double h) {
        return (phi(std::pow(x + h, (long double)beta) - xb) + phi(std::pow(x - h, (long double)beta) - xb)) * std::pow(h, -1.0L - q);
    };
    // near h = x the left point y = x - h is written as v^{1/beta} so that y^beta = v is smooth
    const long double m = 1.0L / beta;
    auto pair_end = [&](long double v) { return pair(x - std::pow(v, m)) * m * std::pow(v, m - 1.0L); };
    long double mid = GKL::integrate(pair, h0, 0.5L * x, 15, 1e-16L) +
                      GKL::integrate(pair_end, 0.0L, std::pow(0.5L * x, (long double)beta), 15, 1e-16L);
    // y - x = x u^{-k} with k(q - beta(p-1)) = 1 turns the slowly decaying tail into a bounded integrand on (0, 1]
    const long double k = 1.0L / (q - beta * (p - 1.0L));
    auto tail = [&](long double u) {
        if (u <= 0.0L) return 0.0L;
        long double d = x * std::pow(u, -k);
        return phi(std::pow(x + d, (long double)beta) - xb) * std::pow(d, -1.0L - q) * k * d / u;
    };
    long double right = GKL::integrate(tail, 0.0L, 1.0L, 15, 1e-16L);
    return double(2.0L * (left + inner + mid + right));
}

}  // namespace

TEST_CASE("quadrature presets")
{
    for (const char* name : {"coarse", "standard", "fine"}) CHECK_NOTHROW(quadrature_preset(name).validate());
    CHECK_THROWS(quadrature_preset("ultra"));
    QuadratureSpec bad = Q;
    bad.face_nodes = 7;
    CHECK_THROWS(bad.validate());
    bad = Q;
    bad.pv_cut = 0.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("constant table keys and json")
{
    ConstantTable t;
    t.record("C", {{"s", 0.5}, {"beta", 0.25}, {"p", 2.0}}, {1.5, "m", 1e-12, "standard"});
    CHECK(ConstantTable::key("C", {{"p", 2.0}, {"s", 0.5}, {"beta", 0.25}}) == "C(beta=0.25,p=2,s=0.5)");
    auto e = t.find("C(beta=0.25,p=2,s=0.5)");
    REQUIRE(e.has_value());
    CHECK(e->value == 1.5);
    ConstantTable back = ConstantTable::from_json(t.to_json());
    CHECK(back.find("C(beta=0.25,p=2,s=0.5)")->error_estimate == 1e-12);
}

TEST_CASE("paired ray integral against direct quadrature")
{
    for (double p : {1.5, 2.0, 3.0})
        for (double q : {0.5, 1.2})
            for (auto [A, S] : {std::pair{1.0, 0.3}, {0.2, -1.0}, {-0.7, 0.01}, {1e-3, 2.0}}) {
                // Φ(tA + t²S) + Φ(-tA + t²S) = |tA|^{p-1} [Φ(1+σ) - Φ(1-σ)], σ = tS/|A|;
                // expm1/log1p keep the small-σ difference, t = w^{1/(p-q)} removes the endpoint singularity
                const double e = 1.0 / (p - q), a = std::abs(A);
                auto f = [&](double w) {
                    if (w <= 0.0) return 0.0;
                    double t = std::pow(w, e), sg = t * S / a;
                    double diff = std::abs(sg) < 0.5 ? std::expm1((p - 1.0) * std::log1p(sg)) - std::expm1((p - 1.0) * std::log1p(-sg))
                                                     : std::copysign(std::pow(std::abs(1.0 + sg), p - 1.0), 1.0 + sg) - std::copysign(std::pow(std::abs(1.0 - sg), p - 1.0), 1.0 - sg);
                    return e * std::pow(a, p - 1.0) * diff * std::pow(t, p - 2.0 - q) * t / w;
                };
                double split = std::pow(std::min(a / std::abs(S), 1.0), p - q);
                double ref = gk(f, 0.0, split);
                if (split < 1.0) ref += gk(f, split, 1.0);
                CHECK(paired_ray_integral(A, S, p, q) == doctest::Approx(ref).epsilon(1e-9));
            }
    // A = 0: 2 Φ(S) / (2(p-1) - q)
    CHECK(paired_ray_integral(0.0, 0.5, 3.0, 1.0) == doctest::Approx(2.0 * 0.25 / 3.0).epsilon(1e-14));
    CHECK(std::isinf(paired_ray_integral(0.0, 0.5, 1.5, 1.2)));
    CHECK(paired_ray_integral(0.3, 0.0, 1.5, 1.2) == 0.0);
}

TEST_CASE("pair weights: 1D closed form and lattice completeness")
{
    auto w1 = PairWeights::get(1, 0.7, 50, Q);
    CHECK(w1->unit(3) == doctest::Approx((std::pow(2.5, -0.7) - std::pow(3.5, -0.7)) / 0.7).epsilon(1e-15));
    CHECK(w1->unit(-3) == w1->unit(3));

    // Σ_{0 < |k|_inf <= E} w(k) + ∫_{|z|_inf > E + 1/2} = ∫_{|z|_inf > 1/2}
    for (int n : {2, 3}) {
        const double q = 0.8;
        const int E = n == 2 ? 40 : 12;
        FracParams fp(0.4, 2.0, n);
        auto w = PairWeights::get(n, q, E, Q);
        double sum = 0.0;
        for (int c = (n == 3 ? -E : 0); c <= (n == 3 ? E : 0); ++c)
            for (int b = -E; b <= E; ++b)
                for (int a = -E; a <= E; ++a)
                    if (a || b || c) sum += w->unit(a, b, c);
        Point dout{E + 0.5, E + 0.5, E + 0.5}, din{0.5, 0.5, 0.5};
        double outer = exterior_rule({}, dout, dout, ConstantTail{1.0}, fp, Q).weights[0];
        double inner = exterior_rule({}, din, din, ConstantTail{1.0}, fp, Q).weights[0];
        // the midpoint rule beyond the refined depth carries an O(depth^{-2}) relative error
        CHECK(sum + outer == doctest::Approx(inner).epsilon(2e-3));
    }
}

TEST_CASE("exterior rule: 1D closed form and unit-cube bounds")
{
    FracParams fp(0.3, 2.0, 1);
    const double q = fp.sp();
    auto r = exterior_rule({0.2, 0, 0}, {1.4, 0, 0}, {0.6, 0, 0}, ConstantTail{2.0}, fp, Q);
    REQUIRE(r.values.size() == 1);
    CHECK(r.values[0] == 2.0);
    CHECK(r.weights[0] == doctest::Approx((std::pow(1.4, -q) + std::pow(0.6, -q)) / q).epsilon(1e-14));

    // between the circumscribed and inscribed balls
    for (int n : {2, 3}) {
        FracParams f(0.5, 2.0, n);
        const double qq = f.sp();
        const double sphere = n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
        Point d{1.0, 1.0, 1.0};
        double T = exterior_rule({}, d, d, ConstantTail{0.0}, f, Q).weights[0];
        CHECK(T < sphere / qq);
        CHECK(T > sphere * std::pow(std::sqrt(double(n)), -qq) / qq);
    }
}

TEST_CASE("eval_pv: constant function gives zero")
{
    for (int n = 1; n <= 3; ++n) {
        Grid g(n, 1.0, n == 3 ? 9 : 21);
        FracParams fp(0.5, 1.5, n);
        auto u = constant_function(g, 3.25);
        auto mask = DomainMask::ball(g, 0.6);
        for (std::size_t i : mask.nodes()) CHECK(eval_pv(u, i, fp, Q) == 0.0);
    }
}

TEST_CASE("eval_pv: indicator of (-1,1) at the origin")
{
    // cells align with +-1 on this grid, so only the exterior tail 2 * (-1) * 2 ∫_1^∞ y^{-1-sp} dy contributes
    FracParams fp(0.25, 2.0, 1);
    Grid g(1, 2.0, 203);
    auto u = sample_profile("indicator-unit-ball", {}, g);
    const double expected = -2.0 * 2.0 / fp.sp();
    CHECK(eval_pv(u, Point{0.0, 0.0, 0.0}, fp, Q) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == -8.0);
}

TEST_CASE("eval_pv: s-power profile on a grid is harmonic within its error estimate")
{
    FracParams fp(0.6, 3.0, 1);
    Grid g(1, 2.0, 201);
    auto u = sample_profile("power-positive-part", {{"beta", 0.6}}, g);
    auto ev = eval_pv_detailed(u, *g.node_at({0.5, 0, 0}), fp, Q);
    CHECK(std::abs(ev.value) <= ev.error_estimate);
}

TEST_CASE("eval_pv invariants")
{
    FracParams fp(0.4, 2.5, 2);
    Grid g(2, 1.0, 25);
    Profile bump = Profile::make("smooth-cutoff", {{"R", 0.3}, {"cx", 0.1}});
    auto u = sample_profile(bump, g);
    auto mask = DomainMask::ball(g, 0.5);

    SUBCASE("odd symmetry and scaling")
    {
        auto neg = u.negated();
        std::vector<double> sv = u.values();
        for (double& v : sv) v *= 3.0;
        GridFunction scaled(g, sv, ConstantTail{0.0});
        for (std::size_t i : mask.nodes()) {
            double v = eval_pv(u, i, fp, Q);
            CHECK(eval_pv(neg, i, fp, Q) == -v);
            CHECK(eval_pv(scaled, i, fp, Q) == doctest::Approx(std::pow(3.0, fp.p() - 1.0) * v).epsilon(1e-10));
        }
    }
    SUBCASE("translation by grid-aligned shifts")
    {
        // shift by two nodes along x; the bump stays inside the box
        Profile moved = Profile::make("smooth-cutoff", {{"R", 0.3}, {"cx", 0.1 + 2.0 * g.spacing()}});
        auto v = sample_profile(moved, g);
        for (std::size_t i : mask.nodes()) {
            auto mi = g.multi_index(i);
            mi[0] += 2;
            CHECK(eval_pv(v, g.index(mi), fp, Q) == doctest::Approx(eval_pv(u, i, fp, Q)).epsilon(1e-12));
        }
    }
}

TEST_CASE("eval_pv: concave profile is a supersolution")
{
    FracParams fp(0.75, 2.0, 1);
    Grid g(1, 1.0, 41);
    auto u = sample_profile("concave-huber", {{"cap", 1.0}}, g);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) CHECK(eval_pv(u, i, fp, Q) <= 0.0);

    FracParams f2(0.75, 2.0, 2);
    Grid g2(2, 1.0, 15);
    auto u2 = sample_profile("concave-huber", {{"cap", 1.5}}, g2);
    auto box = DomainMask::box(g2, 0.9);
    for (std::size_t i : box.nodes()) CHECK(eval_pv(u2, i, f2, Q) <= 0.0);
}

TEST_CASE("eval_profile_1d against an independent decomposition")
{
    for (auto [beta, s, p] : {std::tuple{0.25, 0.5, 2.0}, {0.3, 0.6, 1.5}, {0.2, 0.4, 3.0}}) {
        FracParams fp(s, p, 1);
        auto prof = Profile::make("power-positive-part", {{"beta", beta}});
        for (double x : {0.5, 1.0, 2.0}) {
            double ref = oracle_power_profile(beta, x, p, fp.sp());
            CHECK(eval_profile_1d(prof, x, fp, Q) == doctest::Approx(ref).epsilon(1e-9));
        }
    }
    // the s-power is harmonic
    FracParams fp(0.6, 3.0, 1);
    auto sp = Profile::make("power-positive-part", {{"beta", 0.6}});
    CHECK(std::abs(eval_profile_1d(sp, 0.5, fp, Q)) < 1e-8);
    CHECK_THROWS(eval_profile_1d(sp, 0.0, fp, Q));
}

TEST_CASE("eval_profile_1d and eval_pv agree within their error estimates")
{
    FracParams fp(0.5, 2.0, 1);
    Profile c = Profile::make("smooth-cutoff", {{"R", 0.5}});
    Grid g(1, 1.0, 161);
    auto u = sample_profile(c, g);
    for (double x : {0.0, 0.25, 0.7, 0.9}) {
        // the line evaluator needs x != 0; the profile is flat there
        auto line = eval_profile_1d_estimate(c, x == 0.0 ? 1e-9 : x, fp, Q);
        auto grid = eval_pv_detailed(u, *g.node_at({x, 0, 0}), fp, Q);
        CHECK(std::abs(grid.value - line.value) <= grid.error_estimate + line.error);
    }
}

TEST_CASE("radial reduction")
{
    FracParams fp(0.5, 2.0, 3);
    CHECK(radial_reduce_3d(Profile::constant(2.0), 0.7, fp, Q) == 0.0);
    CHECK_THROWS(radial_reduce_3d(Profile::constant(2.0), 0.0, fp, Q));
    CHECK_THROWS(radial_reduce_3d(Profile::constant(2.0), 1.0, FracParams(0.5, 2.0, 1), Q));

    auto ring = Profile::make("ring", {{"beta", 0.25}, {"r0", 1.0}});
    CHECK(radial_reduce_3d(ring, 1.0 + 1e-4, fp, Q) < 0.0);
}

TEST_CASE("radial reduction agrees with the 3D grid operator")
{
    FracParams fp(0.5, 2.0, 3);
    Profile c = Profile::make("smooth-cutoff", {{"R", 0.5}});
    const double r = 0.7;
    double radial = radial_reduce_3d(c, r, fp, Q);
    Grid g(3, 1.0, 121);
    auto u = sample_profile(c, g);
    double grid = eval_pv(u, Point{r, 0.0, 0.0}, fp, Q);
    CHECK(std::abs(grid / radial - 1.0) < 0.02);
}

TEST_CASE("dead-variable constant")
{
    // 2 ∫_0^∞ (1 + z²)^{-3/2} dz
    boost::math::quadrature::exp_sinh<double> es;
    double oracle2 = 2.0 * es.integrate([](double z) { return std::pow(1.0 + z * z, -1.5); }, 0.0,
                                        std::numeric_limits<double>::infinity());
    ConstantTable t;
    CHECK(dead_variable_constant(FracParams(0.5, 2.0, 2), Q, &t) == doctest::Approx(oracle2).epsilon(1e-12));
    CHECK(oracle2 == doctest::Approx(2.0).epsilon(1e-12));
    // 2D polar: 2π ∫_0^∞ ρ (1 + ρ²)^{-2} dρ = π
    double oracle3 = 2.0 * std::numbers::pi *
                     es.integrate([](double r) { return r * std::pow(1.0 + r * r, -2.0); }, 0.0,
                                  std::numeric_limits<double>::infinity());
    CHECK(dead_variable_constant(FracParams(0.5, 2.0, 3), Q, &t) == doctest::Approx(oracle3).epsilon(1e-12));
    CHECK(dead_variable_closed_form(3, 1.0) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
    CHECK(t.size() == 2);
    auto e = t.find(ConstantTable::key("N", {{"n", 3.0}, {"sp", 1.0}}));
    REQUIRE(e.has_value());
    CHECK(e->error_estimate < 1e-10);

    for (int n : {2, 3}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double sp : {0.5, 1.0, 1.5}) {
            double v = dead_variable_constant(FracParams(sp / 2.0, 2.0, n), Q, &t);
            CHECK(v < prev);
            prev = v;
        }
    }
    CHECK_THROWS(dead_variable_constant(FracParams(0.5, 2.0, 1), Q, &t));
}

TEST_CASE("caccioppoli diagnostic basics")
{
    FracParams fp(0.5, 2.0, 1);
    Grid g(1, 2.0, 81);
    auto zero = constant_function(g, 0.0);
    auto rep = caccioppoli_gap(zero, zero, 0.5, 1.0, fp, Q);
    CHECK(rep.data.at("left") == 0.0);
    CHECK(rep.verdict);
    CHECK_THROWS(caccioppoli_gap(zero, zero, 1.0, 1.0, fp, Q));

    auto u = sample_profile("cone", {{"beta", 0.5}}, g);
    double prev = 0.0;
    for (double r : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        double left = gagliardo_ball_sum(u, r, fp, Q);
        CHECK(left >= prev);
        prev = left;
    }
}
