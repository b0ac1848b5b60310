#include "nonlocal/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace nonlocal {

namespace {

double pow_abs(double t, double p)
{
    return std::pow(std::abs(t), p);
}

// |a + da|^p - |a|^p, accurate when |da| << |a|
double pow_change(double a, double da, double p)
{
    if (da == 0.0) return 0.0;
    if (a == 0.0) return pow_abs(da, p);
    double r = da / a;
    if (r > -0.5 && r < 0.5) return pow_abs(a, p) * std::expm1(p * std::log1p(r));
    return pow_abs(a + da, p) - pow_abs(a, p);
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// energy

DiscreteEnergy::DiscreteEnergy(const DomainMask& omega, const GridFunction& g, const GridFunction& f,
                               const FracParams& params, const QuadratureSpec& quad)
    : grid_(omega.grid()), params_(params)
{
    if (!(g.grid() == grid_) || !(f.grid() == grid_)) throw std::invalid_argument("DiscreteEnergy: grid mismatch");
    const int n = grid_.dim();
    if (params.n() != n) throw std::invalid_argument("DiscreteEnergy: parameter dimension does not match the grid");
    check_tail_admissible(g.tail(), params);
    const int m = grid_.m();
    const double h = grid_.spacing();
    const double q = params.sp();
    hn_ = grid_.cell_volume();

    slot_.assign(grid_.size(), -1);
    for (std::size_t i : omega.nodes()) {
        if (grid_.on_box_boundary(i)) throw std::invalid_argument("DiscreteEnergy: Ω must not touch the box boundary");
        slot_[i] = std::ptrdiff_t(interior_.size());
        interior_.push_back(i);
        f_.push_back(f[i]);
    }
    if (interior_.empty()) throw std::invalid_argument("DiscreteEnergy: Ω has no nodes");

    const int E = m - 1;
    auto W = PairWeights::get(n, q, E, quad);
    const int e1 = n >= 2 ? E : 0, e2 = n >= 3 ? E : 0;
    wtab_.assign(std::size_t(E + 1) * (e1 + 1) * (e2 + 1), 0.0);
    const double scale = std::pow(h, n - q);
    for (int a = 0; a <= E; ++a)
        for (int b = 0; b <= e1; ++b)
            for (int c = 0; c <= e2; ++c)
                if (a || b || c) wtab_[(std::size_t(a) * (e1 + 1) + b) * (e2 + 1) + c] = scale * W->unit(a, b, c);

    // exterior of the box of cells, faces at L + h/2
    const double face = grid_.half_width() + 0.5 * h;
    const bool constant_tail = tail_constant(g.tail()).has_value();
    tails_.resize(interior_.size());
    diag_.assign(interior_.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < std::ptrdiff_t(interior_.size()); ++s) {
        Point x = grid_.coord(interior_[s]);
        Point lo{0.0, 0.0, 0.0}, hi{0.0, 0.0, 0.0};
        for (int k = 0; k < n; ++k) {
            lo[k] = x[k] + face;
            hi[k] = face - x[k];
            // the constant-tail weight is reflection invariant; sorting makes it bitwise so
            if (constant_tail && lo[k] > hi[k]) std::swap(lo[k], hi[k]);
        }
        ExteriorRule rule = exterior_rule(x, lo, hi, g.tail(), params, quad);
        tails_[s] = {rule.values, rule.weights};
    }
    for (std::size_t s = 0; s < interior_.size(); ++s) {
        double row = pair_sum(interior_[s], [](std::size_t) { return 1.0; });
        double t = 0.0;
        for (double w : tails_[s].weights) t += w;
        diag_[s] = 2.0 * row + 2.0 * hn_ * t;
    }
}

// Σ_j W_ij term(j) over grid partners. Offsets are grouped in reflection orbits and each orbit is summed
// pairwise (a-signs, then b-signs, then c-signs), so mirrored nodes produce bitwise-mirrored sums.
template <class Fn>
double DiscreteEnergy::pair_sum(std::size_t node, Fn&& term) const
{
    const int n = grid_.dim();
    const int m = grid_.m();
    const int E = m - 1;
    const int e1 = n >= 2 ? E : 0, e2 = n >= 3 ? E : 0;
    const auto mi = grid_.multi_index(node);
    auto at = [&](int a, int b, int c) {
        std::array<int, 3> t{mi[0] + a, mi[1] + b, mi[2] + c};
        for (int k = 0; k < n; ++k)
            if (t[k] < 0 || t[k] >= m) return 0.0;
        return term(grid_.index(t));
    };
    auto sum_a = [&](int a, int b, int c) { return a ? at(-a, b, c) + at(a, b, c) : at(0, b, c); };
    auto sum_b = [&](int a, int b, int c) { return b ? sum_a(a, -b, c) + sum_a(a, b, c) : sum_a(a, 0, c); };
    double total = 0.0;
    for (int a = 0; a <= E; ++a)
        for (int b = 0; b <= e1; ++b)
            for (int c = 0; c <= e2; ++c) {
                if (!(a || b || c)) continue;
                const double w = wtab_[(std::size_t(a) * (e1 + 1) + b) * (e2 + 1) + c];
                total += w * (c ? sum_b(a, b, -c) + sum_b(a, b, c) : sum_b(a, b, 0));
            }
    return total;
}

double DiscreteEnergy::weight(std::size_t i, std::size_t j) const
{
    if (i == j) return 0.0;
    const int n = grid_.dim();
    const int E = grid_.m() - 1;
    const int e1 = n >= 2 ? E : 0, e2 = n >= 3 ? E : 0;
    auto a = grid_.multi_index(i), b = grid_.multi_index(j);
    int d0 = std::abs(a[0] - b[0]), d1 = std::abs(a[1] - b[1]), d2 = std::abs(a[2] - b[2]);
    return wtab_[(std::size_t(d0) * (e1 + 1) + d1) * (e2 + 1) + d2];
}

double DiscreteEnergy::energy(const std::vector<double>& v) const
{
    if (v.size() != grid_.size()) throw std::invalid_argument("energy: value count does not match the grid");
    const double p = params_.p();
    std::vector<double> part(interior_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < std::ptrdiff_t(interior_.size()); ++s) {
        const std::size_t i = interior_[s];
        const double vi = v[i];
        double pairs = pair_sum(i, [&](std::size_t j) { return (slot_[j] >= 0 ? 1.0 : 2.0) * pow_abs(vi - v[j], p); });
        double tail = 0.0;
        const Tail& T = tails_[s];
        for (std::size_t k = 0; k < T.values.size(); ++k) tail += T.weights[k] * pow_abs(vi - T.values[k], p);
        part[s] = pairs / p + 2.0 * hn_ * tail / p - hn_ * f_[s] * vi;
    }
    double total = 0.0;
    for (double e : part) total += e;
    return total;
}

std::vector<double> DiscreteEnergy::gradient(const std::vector<double>& v) const
{
    if (v.size() != grid_.size()) throw std::invalid_argument("gradient: value count does not match the grid");
    const double p = params_.p();
    std::vector<double> g(interior_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < std::ptrdiff_t(interior_.size()); ++s) {
        const std::size_t i = interior_[s];
        const double vi = v[i];
        double pairs = pair_sum(i, [&](std::size_t j) { return phi_p(vi - v[j], p); });
        double tail = 0.0;
        const Tail& T = tails_[s];
        for (std::size_t k = 0; k < T.values.size(); ++k) tail += T.weights[k] * phi_p(vi - T.values[k], p);
        g[s] = 2.0 * pairs + 2.0 * hn_ * tail - hn_ * f_[s];
    }
    return g;
}

double DiscreteEnergy::energy_change(const std::vector<double>& v, const std::vector<double>& d, double alpha) const
{
    if (d.size() != interior_.size()) throw std::invalid_argument("energy_change: direction size mismatch");
    const double p = params_.p();
    std::vector<double> part(interior_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < std::ptrdiff_t(interior_.size()); ++s) {
        const std::size_t i = interior_[s];
        const double vi = v[i];
        const double di = alpha * d[s];
        double pairs = pair_sum(i, [&](std::size_t j) {
            const std::ptrdiff_t sj = slot_[j];
            const double dj = sj >= 0 ? alpha * d[sj] : 0.0;
            return (sj >= 0 ? 1.0 : 2.0) * pow_change(vi - v[j], di - dj, p);
        });
        double tail = 0.0;
        const Tail& T = tails_[s];
        for (std::size_t k = 0; k < T.values.size(); ++k) tail += T.weights[k] * pow_change(vi - T.values[k], di, p);
        part[s] = pairs / p + 2.0 * hn_ * tail / p - hn_ * f_[s] * di;
    }
    double total = 0.0;
    for (double e : part) total += e;
    return total;
}

double energy(const GridFunction& v, const DiscreteEnergy& E)
{
    if (!(v.grid() == E.grid())) throw std::invalid_argument("energy: grid mismatch");
    return E.energy(v.values());
}

std::vector<double> energy_gradient(const GridFunction& v, const DiscreteEnergy& E)
{
    if (!(v.grid() == E.grid())) throw std::invalid_argument("energy_gradient: grid mismatch");
    return E.gradient(v.values());
}

// ---------------------------------------------------------------------------------------------
// minimization

double SolverConfig::resolved_tolerance(const FracParams& params, double f_scale) const
{
    if (tolerance) {
        if (!(*tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
        return *tolerance;
    }
    const double scale = std::max(1.0, f_scale);
    return (params.p() >= 2.0 ? 1e-8 : 1e-6) * scale;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Preconditioned L-BFGS with Armijo backtracking on the accurately computed energy change.
// With a lower bound the iteration is projected: bound-active variables whose gradient pushes outward
// are frozen for the step, and trial points are clipped to the bound.
SolveReport minimize(const DiscreteEnergy& E, std::vector<double>& v, const std::vector<double>* lower,
                     double tol, const SolverConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto& nodes = E.interior();
    const std::size_t N = nodes.size();
    const double hn = E.cell_volume();
    const auto& D = E.row_sums();

    SolveReport rep;
    rep.tolerance = tol;
    if (lower)
        for (std::size_t s = 0; s < N; ++s) v[nodes[s]] = std::max(v[nodes[s]], (*lower)[s]);

    double J = E.energy(v);
    std::vector<double> g = E.gradient(v);
    rep.energy_history.push_back(J);

    auto at_bound = [&](std::size_t s) { return lower && v[nodes[s]] <= (*lower)[s]; };
    auto projected_sup = [&]() {
        double m = 0.0;
        for (std::size_t s = 0; s < N; ++s) {
            double gs = g[s];
            if (at_bound(s)) gs = std::min(gs, 0.0);
            m = std::max(m, std::abs(gs));
        }
        return m / hn;
    };

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    std::vector<double> d(N), qv(N), trial(N);
    int it = 0;
    int stalls = 0;
    for (; it < cfg.max_iterations; ++it) {
        if (projected_sup() <= tol) {
            rep.converged = true;
            break;
        }
        std::vector<char> freev(N, 1);
        if (lower)
            for (std::size_t s = 0; s < N; ++s) freev[s] = !(at_bound(s) && g[s] >= 0.0);

        // two-loop recursion on the free variables, D^{-1} scaled initial matrix
        for (std::size_t s = 0; s < N; ++s) qv[s] = freev[s] ? g[s] : 0.0;
        std::vector<double> alpha(S.size());
        for (std::size_t k = S.size(); k-- > 0;) {
            double a = 0.0;
            for (std::size_t s = 0; s < N; ++s)
                if (freev[s]) a += S[k][s] * qv[s];
            a *= rho[k];
            alpha[k] = a;
            for (std::size_t s = 0; s < N; ++s)
                if (freev[s]) qv[s] -= a * Y[k][s];
        }
        double gamma = 1.0;
        if (!S.empty()) {
            const auto& y = Y.back();
            double yDy = 0.0;
            for (std::size_t s = 0; s < N; ++s) yDy += y[s] * y[s] / D[s];
            gamma = 1.0 / (rho.back() * yDy);
        }
        for (std::size_t s = 0; s < N; ++s) qv[s] = freev[s] ? gamma * qv[s] / D[s] : 0.0;
        for (std::size_t k = 0; k < S.size(); ++k) {
            double b = 0.0;
            for (std::size_t s = 0; s < N; ++s)
                if (freev[s]) b += Y[k][s] * qv[s];
            b *= rho[k];
            for (std::size_t s = 0; s < N; ++s)
                if (freev[s]) qv[s] += S[k][s] * (alpha[k] - b);
        }
        for (std::size_t s = 0; s < N; ++s) d[s] = -qv[s];
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t s = 0; s < N; ++s) d[s] = freev[s] ? -g[s] / D[s] : 0.0;
            slope = dot(g, d);
            if (!(slope < 0.0)) break;
        }

        // backtracking; the step actually taken is the projected one
        double step = 1.0;
        double dJ = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t s = 0; s < N; ++s) {
                double nv = v[nodes[s]] + step * d[s];
                if (lower) nv = std::max(nv, (*lower)[s]);
                trial[s] = nv - v[nodes[s]];
            }
            dJ = E.energy_change(v, trial, 1.0);
            if (dJ <= 1e-4 * dot(g, trial) && dJ <= 0.0) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!S.empty()) {
                S.clear();
                Y.clear();
                rho.clear();
                if (++stalls < 3) continue;
            }
            rep.status = "line search failed";
            break;
        }
        stalls = 0;
        for (std::size_t s = 0; s < N; ++s) v[nodes[s]] += trial[s];
        std::vector<double> gn = E.gradient(v);
        std::vector<double> yv(N);
        for (std::size_t s = 0; s < N; ++s) yv[s] = gn[s] - g[s];
        double sy = dot(trial, yv);
        if (sy > 1e-300) {
            S.push_back(trial);
            Y.push_back(yv);
            rho.push_back(1.0 / sy);
            if (int(S.size()) > cfg.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        g = std::move(gn);
        J += dJ;
        rep.energy_history.push_back(J);
    }
    rep.iterations = it;
    rep.energy = E.energy(v);
    rep.gradient_sup = projected_sup();
    double l2 = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
        double gs = at_bound(s) ? std::min(g[s], 0.0) : g[s];
        l2 += gs * gs;
    }
    rep.residual_l2 = std::sqrt(l2 / double(N)) / hn;
    if (rep.gradient_sup <= tol) rep.converged = true;
    if (rep.converged)
        rep.status = "converged";
    else if (rep.status.empty())
        rep.status = "iteration budget exhausted";
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::vector<double> start_values(const GridFunction& data, const DomainMask& omega, const SolverConfig& cfg)
{
    std::vector<double> v = data.values();
    if (cfg.initial) {
        if (cfg.initial->size() != v.size()) throw std::invalid_argument("solver: initial guess has the wrong size");
        for (std::size_t i : omega.nodes()) v[i] = (*cfg.initial)[i];
    }
    return v;
}

double sup_on(const GridFunction& f, const DomainMask& omega)
{
    double m = 0.0;
    for (std::size_t i : omega.nodes()) m = std::max(m, std::abs(f[i]));
    return m;
}

}  // namespace

SolveResult solve_dirichlet(const GridFunction& f, const GridFunction& g, const DomainMask& omega,
                            const FracParams& params, const SolverConfig& config)
{
    DiscreteEnergy E(omega, g, f, params, config.quad);
    std::vector<double> v = start_values(g, omega, config);
    const double tol = config.resolved_tolerance(params, sup_on(f, omega));
    SolveReport rep = minimize(E, v, nullptr, tol, config);
    return {GridFunction(g.grid(), std::move(v), g.tail()), rep};
}

SolveResult solve_obstacle(const GridFunction& psi, const GridFunction& f, const DomainMask& omega,
                           const FracParams& params, ObstacleSide side, const SolverConfig& config)
{
    if (side == ObstacleSide::below) {
        // v <= ψ for ℒ with source f is -v >= -ψ with source -f
        SolverConfig c = config;
        if (c.initial)
            for (double& x : *c.initial) x = -x;
        SolveResult r = solve_obstacle(psi.negated(), f.negated(), omega, params, ObstacleSide::above, c);
        return {r.u.negated(), r.report};
    }
    DiscreteEnergy E(omega, psi, f, params, config.quad);
    std::vector<double> v = start_values(psi, omega, config);
    std::vector<double> lower(E.interior().size());
    for (std::size_t s = 0; s < lower.size(); ++s) lower[s] = psi[E.interior()[s]];
    const double tol = config.resolved_tolerance(params, sup_on(f, omega));
    SolveReport rep = minimize(E, v, &lower, tol, config);
    return {GridFunction(psi.grid(), std::move(v), psi.tail()), rep};
}

// ---------------------------------------------------------------------------------------------
// comparison

CertificateReport comparison_check(const GridFunction& u, const GridFunction& v, const GridFunction& f_u,
                                   const GridFunction& f_v, const DomainMask& omega, double tolerance)
{
    const Grid& g = omega.grid();
    if (!(u.grid() == g) || !(v.grid() == g) || !(f_u.grid() == g) || !(f_v.grid() == g))
        throw std::invalid_argument("comparison_check: grid mismatch");
    CertificateReport rep;
    rep.subject = "comparison";
    rep.relation = ">=";
    rep.bound = 0.0;
    rep.margin = -tolerance;
    rep.tolerances["solver"] = tolerance;
    rep.data["applicable"] = 1.0;

    auto inapplicable = [&](const std::string& why) {
        rep.data["applicable"] = 0.0;
        rep.fail("inapplicable: " + why);
        rep.verdict = false;
        return rep;
    };
    for (std::size_t i : omega.nodes())
        if (f_u[i] > f_v[i]) return inapplicable("f_u > f_v inside the domain");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!omega.contains(i) && v[i] < u[i]) return inapplicable("v < u outside the domain");
    auto cu = tail_constant(u.tail()), cv = tail_constant(v.tail());
    if (cu && cv) {
        if (*cv < *cu) return inapplicable("v < u on the tail");
    } else {
        // sample both tails on shells outside the box
        const int n = g.dim();
        const double L = g.half_width();
        for (double r : {1.5, 2.0, 4.0, 16.0})
            for (int k = 0; k < n; ++k)
                for (double sgn : {-1.0, 1.0}) {
                    Point y{0.0, 0.0, 0.0};
                    y[k] = sgn * r * L;
                    if (tail_value(v.tail(), y, n) < tail_value(u.tail(), y, n))
                        return inapplicable("v < u on the tail");
                }
    }
    double worst = INFINITY;
    for (std::size_t i : omega.nodes()) {
        Point x = g.coord(i);
        rep.add(std::vector<double>(x.begin(), x.begin() + g.dim()), v[i] - u[i], 0.0);
        worst = std::min(worst, v[i] - u[i]);
    }
    rep.data["min_difference"] = worst;
    rep.finalize();
    return rep;
}

}  // namespace nonlocal
