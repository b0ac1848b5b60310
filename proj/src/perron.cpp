#include "nonlocal/perron.hpp"

#include <algorithm>
#include <cmath>

namespace nonlocal {

namespace {

double sup_on(const GridFunction& f, const DomainMask& omega)
{
    double m = 0.0;
    for (std::size_t i : omega.nodes()) m = std::max(m, std::abs(f[i]));
    return m;
}

void require_converged(const SolveReport& rep, const std::string& where)
{
    if (!rep.converged) throw SolverFailure(where + ": " + rep.status, rep);
}

}  // namespace

double PerronConfig::resolved_sweep_tolerance(const FracParams& params, double f_scale) const
{
    if (sweep_tolerance) return *sweep_tolerance;
    return 10.0 * solver.resolved_tolerance(params, f_scale);
}

SolveResult poisson_modify(const GridFunction& v, const DomainMask& D, const GridFunction& f, const FracParams& params,
                           const SolverConfig& config)
{
    if (!(D.grid() == v.grid()) || !(f.grid() == v.grid()))
        throw std::invalid_argument("poisson_modify: grid mismatch");
    for (std::size_t i : D.nodes())
        if (v.grid().on_box_boundary(i)) throw std::invalid_argument("poisson_modify: D touches the grid box");
    SolverConfig c = config;
    if (!c.initial) c.initial = v.values();
    SolveResult r = solve_dirichlet(f, v, D, params, c);
    require_converged(r.report, "poisson_modify");
    return r;
}

Envelope upper_perron(const GridFunction& g, const GridFunction& f, const DomainMask& omega, const FracParams& params,
                      const PerronConfig& config)
{
    const DomainMask ex = omega.with_exhaustion(config.layers);
    const double tol = config.resolved_sweep_tolerance(params, sup_on(f, omega));

    SolveResult init = solve_obstacle(g, f, omega, params, ObstacleSide::above, config.solver);
    require_converged(init.report, "upper_perron obstacle");

    Envelope env{init.u, {}, 0, false, tol, init.report};
    GridFunction V = init.u;
    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        const GridFunction before = V;
        int level = 0;
        for (const DomainMask& D : ex.erosion_levels()) {
            SolverConfig c = config.solver;
            c.initial = V.values();
            SolveResult r = poisson_modify(V, D, f, params, c);
            LevelLog row;
            row.sweep = sweep;
            row.level = ++level;
            row.nodes = D.count();
            row.iterations = r.report.iterations;
            for (std::size_t i : D.nodes()) {
                const double d = r.u[i] - V[i];
                row.wrong_way = std::max(row.wrong_way, d);
                row.change = std::max(row.change, std::abs(d));
            }
            env.log.push_back(row);
            if (row.wrong_way > tol)
                throw std::logic_error("upper_perron: Poisson modification increased the envelope by " +
                                       std::to_string(row.wrong_way));
            V = r.u;
        }
        env.sweeps = sweep;
        double change = 0.0;
        for (std::size_t i : omega.nodes()) change = std::max(change, std::abs(V[i] - before[i]));
        if (change < tol) {
            env.converged = true;
            break;
        }
    }
    if (!env.converged) throw SolverFailure("upper_perron: sweep budget exhausted", init.report);
    env.u = V;
    return env;
}

Envelope lower_perron(const GridFunction& g, const GridFunction& f, const DomainMask& omega, const FracParams& params,
                      const PerronConfig& config)
{
    // subsolutions of the problem (g, f) are negated supersolutions of (-g, -f)
    PerronConfig c = config;
    if (c.solver.initial)
        for (double& x : *c.solver.initial) x = -x;
    Envelope env = upper_perron(g.negated(), f.negated(), omega, params, c);
    env.u = env.u.negated();
    return env;
}

PerronReport resolutivity_gap(const GridFunction& g, const GridFunction& f, const DomainMask& omega,
                              const FracParams& params, const PerronConfig& config)
{
    Envelope up = upper_perron(g, f, omega, params, config);
    Envelope lo = lower_perron(g, f, omega, params, config);
    SolveResult direct = solve_dirichlet(f, g, omega, params, config.solver);
    require_converged(direct.report, "resolutivity_gap direct solve");

    PerronReport rep{.upper = up.u, .lower = lo.u, .direct = direct.u, .upper_log = up.log, .lower_log = lo.log,
                     .refinement = {}};
    rep.converged = up.converged && lo.converged;
    rep.tolerance = up.monotone_tolerance;
    rep.ordering_slack = INFINITY;
    for (std::size_t i : omega.nodes()) {
        const double d = up.u[i] - lo.u[i];
        rep.gap = std::max(rep.gap, std::abs(d));
        rep.ordering_slack = std::min(rep.ordering_slack, d);
        rep.direct_difference = std::max({rep.direct_difference, std::abs(up.u[i] - direct.u[i]),
                                          std::abs(lo.u[i] - direct.u[i])});
    }
    return rep;
}

PerronReport resolutivity_study(const PerronProblem& problem, int dim, double half_width, const std::vector<int>& ms,
                                const FracParams& params, const PerronConfig& config)
{
    if (ms.empty()) throw std::invalid_argument("resolutivity_study: empty refinement ladder");
    std::optional<PerronReport> last;
    std::vector<RefinementRow> rows;
    for (int m : ms) {
        Grid grid(dim, half_width, m);
        PerronReport rep = resolutivity_gap(problem.g(grid), problem.f(grid), problem.omega(grid), params, config);
        rows.push_back({m, grid.spacing(), rep.gap, rep.direct_difference});
        last = std::move(rep);
    }
    last->refinement = rows;
    last->gap_decreasing = rows.size() >= 2;
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (!(rows[k].gap < rows[k - 1].gap)) last->gap_decreasing = false;
    return *last;
}

}  // namespace nonlocal
