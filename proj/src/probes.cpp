#include "nonlocal/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nonlocal {

namespace {

double distance_to(const Point& x, const Point& c, int n)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
    return std::sqrt(s);
}

std::vector<double> head(const Point& x, int n) { return std::vector<double>(x.begin(), x.begin() + n); }

std::size_t require_node(const Grid& grid, const Point& x, const char* what)
{
    auto node = grid.node_at(x);
    if (!node) throw std::invalid_argument(std::string(what) + " is not a grid node");
    return *node;
}

Point along(const Point& x, const Point& d, double t)
{
    return {x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]};
}

}  // namespace

std::string verdict_tag(Verdict v)
{
    switch (v) {
    case Verdict::attaining: return "attaining";
    case Verdict::ignoring: return "ignoring";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

// ---------------------------------------------------------------------------------------------
// barriers at a boundary point

CertificateReport barrier_certificate_at(const Point& xi0, const GridFunction& gamma, const DomainMask& omega,
                                         const FracParams& params, const QuadratureSpec& quad)
{
    const Grid& grid = omega.grid();
    if (!(gamma.grid() == grid)) throw std::invalid_argument("barrier_certificate_at: grid mismatch");
    if (omega.count() == 0) throw std::invalid_argument("barrier_certificate_at: empty domain");
    const int n = grid.dim();
    const double h = grid.spacing();
    CertificateReport rep;
    rep.subject = "barrier at boundary point";
    rep.relation = "<=";
    rep.bound = 0.0;

    // (i) supersolution on a sample of Ω
    const std::size_t stride = std::max<std::size_t>(1, omega.count() / 64);
    bool super_ok = true;
    for (std::size_t k = 0; k < omega.count(); k += stride) {
        std::size_t i = omega.nodes()[k];
        PvEvaluation e = eval_pv_detailed(gamma, i, params, quad);
        super_ok = rep.add(head(grid.coord(i), n), e.value, 0.0).ok && super_ok;
    }
    if (!super_ok) rep.fail("(i) supersolution");

    // (ii) positivity away from ξ0
    double scale = 0.0;
    for (double v : gamma.values()) scale = std::max(scale, std::abs(v));
    std::size_t nonpositive = 0;
    for (std::size_t i : omega.nodes())
        if (distance_to(grid.coord(i), xi0, n) > 1e-9 * h && !(gamma[i] > 0.0)) ++nonpositive;
    rep.data["nonpositive_nodes"] = static_cast<double>(nonpositive);
    if (nonpositive > 0) rep.fail("(ii) positivity");

    // (iii) limit at ξ0 along Ω nodes at distances near 8h, 4h, 2h, h
    const double at_xi0 = gamma.evaluate(xi0);
    rep.data["value_at_xi0"] = at_xi0;
    rep.tolerances["limit"] = 1e-12 * std::max(1.0, scale);
    bool limit_ok = std::abs(at_xi0) <= rep.tolerances["limit"];
    double prev = std::numeric_limits<double>::infinity();
    for (int j : {8, 4, 2, 1}) {
        std::size_t best = omega.nodes().front();
        double err = std::numeric_limits<double>::infinity();
        for (std::size_t i : omega.nodes()) {
            double e = std::abs(distance_to(grid.coord(i), xi0, n) - j * h);
            if (e < err) {
                err = e;
                best = i;
            }
        }
        rep.data["approach_" + std::to_string(j) + "h"] = gamma[best];
        if (!(gamma[best] < prev)) limit_ok = false;
        prev = gamma[best];
    }
    if (!limit_ok) rep.fail("(iii) limit at the boundary point");
    rep.finalize();
    return rep;
}

GridFunction ring_barrier(const Grid& grid, const Point& y0, double r, double R, const FracParams& params,
                          const SolverConfig& config)
{
    if (!(r > 0.0 && R > r)) throw std::invalid_argument("ring_barrier: need 0 < r < R");
    const int n = grid.dim();
    for (int k = 0; k < n; ++k)
        if (std::abs(y0[k]) + R > grid.half_width())
            throw std::invalid_argument("ring_barrier: the ring leaves the grid box");
    std::vector<char> flags(grid.size(), 0);
    std::vector<double> data(grid.size(), 1.0);
    const double slack = 1e-9 * grid.spacing();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = distance_to(grid.coord(i), y0, n);
        if (d <= r + slack) data[i] = 0.0;
        flags[i] = d > r + slack && d < R - slack;
    }
    GridFunction g(grid, std::move(data), ConstantTail{1.0});
    SolveResult sol = solve_dirichlet(constant_function(grid, 1.0), g, DomainMask::from_flags(grid, flags), params,
                                      config);
    if (!sol.report.converged) throw std::runtime_error("ring_barrier: " + sol.report.status);
    return sol.u;
}

// ---------------------------------------------------------------------------------------------
// regularity classification

RegularityReport classify_regularity(const RegularityProblem& problem, const FracParams& params,
                                     const std::vector<int>& ms, const SolverConfig& config)
{
    if (ms.size() < 3) throw std::invalid_argument("classify_regularity: need at least 3 refinement levels");
    RegularityReport rep;
    rep.xi0 = problem.xi0;
    const int n = problem.dim;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        Grid grid(n, problem.half_width, ms[k]);
        DomainMask om = problem.omega(grid);
        GridFunction g = problem.g(grid);
        GridFunction f = problem.f(grid);
        const std::size_t xi_node = require_node(grid, problem.xi0, "xi0");
        if (om.contains(xi_node)) throw std::invalid_argument("classify_regularity: xi0 lies inside the domain");

        RegularityLevel lv;
        lv.m = ms[k];
        lv.h = grid.spacing();
        const int j = std::max(1, 4 >> k);
        lv.distance = j * lv.h;
        lv.probe = along(problem.xi0, problem.direction, lv.distance);
        const std::size_t probe = require_node(grid, lv.probe, "probe point");
        if (!om.contains(probe)) throw std::invalid_argument("classify_regularity: probe point outside the domain");

        SolveResult sol = solve_dirichlet(f, g, om, params, config);
        rep.converged = rep.converged && sol.report.converged;
        lv.iterations = sol.report.iterations;
        rep.target = g[xi_node];
        lv.u = sol.u[probe];
        lv.discrepancy = std::abs(lv.u - rep.target);

        if (problem.reference_omega) {
            SolveResult ref = solve_dirichlet(f, g, problem.reference_omega(grid), params, config);
            rep.converged = rep.converged && ref.report.converged;
            lv.reference_u = ref.u[probe];
            double sum = 0.0;
            for (std::size_t i : om.nodes()) sum += std::abs(sol.u[i] - ref.u[i]);
            lv.field_discrepancy = sum / static_cast<double>(om.count());
            lv.jump = std::abs(rep.target - ref.u[xi_node]);
        } else {
            lv.reference_u = std::numeric_limits<double>::quiet_NaN();
            lv.field_discrepancy = std::numeric_limits<double>::quiet_NaN();
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t i = 0; i < grid.size(); ++i)
                if (!om.contains(i)) {
                    lo = std::min(lo, g[i]);
                    hi = std::max(hi, g[i]);
                }
            lv.jump = hi - lo;
        }
        lv.field = sol.u.values();
        rep.levels.push_back(std::move(lv));
    }

    const RegularityLevel& last = rep.levels.back();
    bool att = last.discrepancy < verdict_threshold * last.jump;
    bool ign = static_cast<bool>(problem.reference_omega) && last.field_discrepancy < verdict_threshold * last.jump;
    for (std::size_t k = 1; k < rep.levels.size(); ++k) {
        att = att && rep.levels[k].discrepancy < rep.levels[k - 1].discrepancy;
        ign = ign && rep.levels[k].field_discrepancy < rep.levels[k - 1].field_discrepancy;
    }
    rep.attaining_trend = att;
    rep.ignoring_trend = ign;
    rep.verdict = att && !ign ? Verdict::attaining : ign && !att ? Verdict::ignoring : Verdict::inconclusive;
    return rep;
}

RegularityProblem puncture_problem(double f_value)
{
    RegularityProblem pb;
    pb.dim = 1;
    pb.half_width = 2.0;
    pb.xi0 = {0.0, 0.0, 0.0};
    pb.direction = {1.0, 0.0, 0.0};
    pb.omega = [](const Grid& g) { return DomainMask::punctured_ball(g, 1.0); };
    pb.g = [](const Grid& g) {
        std::vector<double> v(g.size(), 0.0);
        v[require_node(g, Point{0.0, 0.0, 0.0}, "puncture")] = 1.0;
        return GridFunction(g, std::move(v), ConstantTail{0.0});
    };
    pb.f = [f_value](const Grid& g) { return constant_function(g, f_value); };
    pb.reference_omega = [](const Grid& g) { return DomainMask::ball(g, 1.0); };
    return pb;
}

RegularityProblem exterior_sphere_problem(double f_value)
{
    RegularityProblem pb;
    pb.dim = 1;
    pb.half_width = 2.0;
    pb.xi0 = {1.0, 0.0, 0.0};
    pb.direction = {-1.0, 0.0, 0.0};
    pb.omega = [](const Grid& g) { return DomainMask::ball(g, 1.0); };
    pb.g = [](const Grid& g) {
        ProfileParams pp;
        pp.center = {1.5, 0.0, 0.0};
        pp.inner = 0.5;
        pp.outer = 1.5;
        pp.value_in = 1.0;
        pp.value_out = 0.0;
        return sample_profile(Profile::make(ProfileFamily::smooth_step, pp), g);
    };
    pb.f = [f_value](const Grid& g) { return constant_function(g, f_value); };
    return pb;
}

std::vector<RegularityReport> puncture_experiment(const std::vector<FracParams>& params_list,
                                                  const std::vector<int>& ms, const SolverConfig& config)
{
    std::vector<RegularityReport> out;
    for (const FracParams& fp : params_list) {
        if (fp.n() != 1) throw std::invalid_argument("puncture_experiment: one-dimensional parameters expected");
        RegularityReport r = classify_regularity(puncture_problem(0.0), fp, ms, config);
        r.label = "puncture s=" + std::to_string(fp.s()) + " p=" + std::to_string(fp.p());
        out.push_back(std::move(r));
    }
    return out;
}

RhsIndependence rhs_independence_experiment(const RegularityProblem& problem, const FracParams& params,
                                            const std::vector<int>& ms, const SolverConfig& config)
{
    RhsIndependence out;
    const double fs[3] = {-1.0, 0.0, 1.0};
    double tol = 0.0;
    for (int k = 0; k < 3; ++k) {
        RegularityProblem pb = problem;
        const double fv = fs[k];
        pb.f = [fv](const Grid& g) { return constant_function(g, fv); };
        out.reports[k] = classify_regularity(pb, params, ms, config);
        out.reports[k].label = "f=" + std::to_string(static_cast<int>(fv));
        tol = std::max(tol, config.resolved_tolerance(params, std::abs(fv)));
    }
    out.agree = out.reports[0].verdict == out.reports[1].verdict && out.reports[1].verdict == out.reports[2].verdict;
    out.ordering_slack = INFINITY;
    for (std::size_t l = 0; l < ms.size(); ++l)
        for (std::size_t i = 0; i < out.reports[0].levels[l].field.size(); ++i) {
            const double a = out.reports[0].levels[l].field[i];
            const double b = out.reports[1].levels[l].field[i];
            const double c = out.reports[2].levels[l].field[i];
            out.ordering_slack = std::min({out.ordering_slack, b - a, c - b});
        }
    out.ordered = out.ordering_slack >= -10.0 * tol;
    return out;
}

CertificateReport exterior_value_check(const Point& x0, const RegularityProblem& problem, const FracParams& params,
                                       const std::vector<int>& ms, const SolverConfig& config)
{
    CertificateReport rep;
    rep.subject = "exterior value";
    rep.relation = "<=";
    rep.bound = 0.0;
    const int n = problem.dim;
    std::vector<double> osc;
    for (int m : ms) {
        Grid grid(n, problem.half_width, m);
        DomainMask om = problem.omega(grid);
        const std::size_t node = require_node(grid, x0, "x0");
        const auto mi = grid.multi_index(node);
        std::vector<std::size_t> patch;
        for (int a = -1; a <= 1; ++a)
            for (int b = n > 1 ? -1 : 0; b <= (n > 1 ? 1 : 0); ++b)
                for (int c = n > 2 ? -1 : 0; c <= (n > 2 ? 1 : 0); ++c) {
                    std::array<int, 3> nb{mi[0] + a, mi[1] + b, mi[2] + c};
                    bool inside = true;
                    for (int k = 0; k < n; ++k) inside = inside && nb[k] >= 0 && nb[k] < m;
                    if (!inside) continue;
                    const std::size_t i = grid.index(nb);
                    if (om.contains(i))
                        throw std::invalid_argument("exterior_value_check: x0 is not at positive grid distance from the domain");
                    patch.push_back(i);
                }
        GridFunction g = problem.g(grid);
        SolveResult sol = solve_dirichlet(problem.f(grid), g, om, params, config);
        if (!sol.report.converged) rep.notes.push_back("solver: " + sol.report.status + " at m=" + std::to_string(m));
        rep.add(head(x0, n), std::abs(sol.u[node] - g[node]), 0.0);
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i : patch) {
            lo = std::min(lo, sol.u[i]);
            hi = std::max(hi, sol.u[i]);
        }
        osc.push_back(hi - lo);
        rep.data["oscillation_m" + std::to_string(m)] = hi - lo;
    }
    bool shrinks = true;
    for (std::size_t k = 1; k < osc.size(); ++k) shrinks = shrinks && osc[k] <= osc[k - 1];
    if (osc.front() > 0.0) shrinks = shrinks && osc.back() < osc.front();
    if (!shrinks) rep.fail("patch oscillation does not shrink");
    rep.finalize();
    return rep;
}

}  // namespace nonlocal
