#include "nonlocal/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nonlocal {

namespace {

using quadrature::Result;

constexpr double kTol = 1e-12;

void require(bool ok, const char* msg)
{
    if (!ok) throw std::invalid_argument(msg);
}

double sphere_area(int n)
{
    return n == 1 ? 2.0 : (n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
}

// ∫_0^1 t^{β-1} (1-t^β)^{p-2} F(t, 1-t) dt.
// [0, 1/2]: u = t^β.  [1/2, 1]: 1 - t = w^k with k large enough to make the endpoint power nonnegative.
template <class F>
Result beta_weight_integral(double beta, double p, double worst_exponent, F&& f, double tol = kTol)
{
    auto left = [&](double u, double, double) {
        double t = std::pow(u, 1.0 / beta);
        return std::pow(1.0 - u, p - 2.0) * f(t, 1.0 - t) / beta;
    };
    Result a = quadrature::tanh_sinh(left, 0.0, std::pow(0.5, beta), tol);

    const double k = std::max(2.0, 1.0 / (1.0 + std::min(0.0, worst_exponent)));
    auto right = [&](double w, double, double) {
        if (w == 0.0) return 0.0;
        double omt = std::pow(w, k);
        double t = 1.0 - omt;
        double one_minus_tb = -std::expm1(beta * std::log1p(-omt));
        return k * std::pow(w, k - 1.0) * std::pow(t, beta - 1.0) * std::pow(one_minus_tb, p - 2.0) * f(t, omt);
    };
    Result b = quadrature::tanh_sinh(right, 0.0, std::pow(0.5, 1.0 / k), tol);
    return {a.value + b.value, a.error + b.error + 1e-15 * (std::abs(a.value) + std::abs(b.value))};
}

// log t accurate near both ends
double log_t(double t, double omt)
{
    return t > 0.5 ? std::log1p(-omt) : std::log(t);
}

// (q/(1-q)) [(1+x)^{1-q} - (1-t)^{1-q}], q = 1 giving ln((1+x)/(1-t))
double brace(double x, double t, double omt, double q)
{
    double alpha = 1.0 - q;
    double lr = std::log1p(x) - (t > 0.5 ? std::log(omt) : std::log1p(-t));
    if (alpha == 0.0) return lr;
    return q * std::pow(omt, alpha) * std::expm1(alpha * lr) / alpha;
}

double worst(double s, double p)
{
    return std::min(p - 2.0, p - 1.0 - s * p);
}

// ∫ (t^{p(s-β)} - 1)(1-t^β)^{p-2} t^{β-1} (1-t)^{-sp} dt
Result main_integral(double beta, double s, double p)
{
    const double q = s * p;
    const double e = p * (s - beta);
    if (e == 0.0) return {0.0, 0.0};
    return beta_weight_integral(beta, p, worst(s, p), [&](double t, double omt) {
        if (t == 0.0) return -std::pow(omt, -q);
        return std::expm1(e * log_t(t, omt)) * std::pow(omt, -q);
    });
}

void check_sp(double s, double p)
{
    require(s > 0.0 && s < 1.0, "s must lie in (0,1)");
    require(p > 1.0, "p must exceed 1");
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// families

std::string barrier_tag(BarrierFamily f)
{
    switch (f) {
    case BarrierFamily::power_positive_part: return "power-positive-part";
    case BarrierFamily::truncated_minorant: return "truncated-minorant";
    case BarrierFamily::half_space: return "half-space";
    case BarrierFamily::cone: return "cone";
    case BarrierFamily::ring: return "ring";
    case BarrierFamily::shell_1d: return "one-dim-shell";
    case BarrierFamily::indicator_ball: return "indicator-ball";
    case BarrierFamily::smooth_cutoff: return "smooth-cutoff";
    }
    return "unknown";
}

BarrierFamily barrier_from_tag(const std::string& tag)
{
    for (auto f : all_barrier_families())
        if (barrier_tag(f) == tag) return f;
    throw std::invalid_argument("unknown barrier family: " + tag);
}

std::vector<BarrierFamily> all_barrier_families()
{
    return {BarrierFamily::power_positive_part, BarrierFamily::truncated_minorant, BarrierFamily::half_space,
            BarrierFamily::cone, BarrierFamily::ring, BarrierFamily::shell_1d, BarrierFamily::indicator_ball,
            BarrierFamily::smooth_cutoff};
}

bool BarrierSpec::uses_beta() const noexcept
{
    return family != BarrierFamily::indicator_ball && family != BarrierFamily::smooth_cutoff;
}

BarrierSpec BarrierSpec::unchecked(BarrierFamily family, const FracParams& params, double beta, double r0, double R,
                                   double L, Point normal)
{
    BarrierSpec b;
    b.family = family;
    b.params = params;
    b.beta = beta;
    b.r0 = r0;
    b.R = R;
    b.L = L;
    double nn = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
    require(nn > 0.0, "normal must be nonzero");
    for (double& c : normal) c /= nn;
    b.normal = normal;
    if (b.uses_beta()) require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    require(r0 > 0.0 && R > 0.0 && L > 0.0, "r0, R, L must be positive");
    switch (family) {
    case BarrierFamily::power_positive_part:
    case BarrierFamily::truncated_minorant:
    case BarrierFamily::shell_1d:
        require(params.n() == 1, "family is one-dimensional");
        break;
    case BarrierFamily::half_space:
        require(params.n() >= 2, "half-space family needs n >= 2");
        break;
    case BarrierFamily::ring:
        require(params.n() == 3, "ring family needs n = 3");
        break;
    case BarrierFamily::cone:
        require(params.n() != 2, "cone certificates use the line (n = 1) or radial (n = 3) evaluator");
        break;
    case BarrierFamily::indicator_ball:
        require(params.n() != 2, "indicator certificates use the line (n = 1) or radial (n = 3) evaluator");
        break;
    case BarrierFamily::smooth_cutoff:
        break;
    }
    return b;
}

BarrierSpec BarrierSpec::make(BarrierFamily family, const FracParams& params, double beta, double r0, double R,
                              double L, Point normal)
{
    BarrierSpec b = unchecked(family, params, beta, r0, R, L, normal);
    if (family == BarrierFamily::truncated_minorant)
        require(beta <= params.s(), "truncated minorant needs beta <= s");
    else if (b.uses_beta())
        require(beta < params.s(), "strict supersolution claim needs beta < s");
    if (family == BarrierFamily::indicator_ball) require(params.sp() < 1.0, "indicator barrier needs sp < 1");
    return b;
}

Profile BarrierSpec::profile() const
{
    ProfileParams pp;
    pp.beta = beta;
    switch (family) {
    case BarrierFamily::power_positive_part:
        return Profile::make(ProfileFamily::power_positive_part, pp);
    case BarrierFamily::truncated_minorant:
        pp.L = L;
        return Profile::make(ProfileFamily::truncated_minorant, pp);
    case BarrierFamily::half_space:
        pp.direction = normal;
        return Profile::make(ProfileFamily::half_space, pp);
    case BarrierFamily::cone:
        pp.radius = R;
        return Profile::make(ProfileFamily::cone, pp);
    case BarrierFamily::ring:
        pp.r0 = r0;
        return Profile::make(ProfileFamily::ring, pp);
    case BarrierFamily::shell_1d:
        pp.r0 = r0;
        return Profile::make(ProfileFamily::shell_1d, pp);
    case BarrierFamily::indicator_ball:
        pp.radius = R;
        return Profile::make(ProfileFamily::indicator_ball, pp);
    case BarrierFamily::smooth_cutoff:
        pp.radius = R;
        return Profile::make(ProfileFamily::smooth_cutoff, pp);
    }
    throw std::logic_error("unreachable");
}

Result barrier_operator(const BarrierSpec& spec, const Point& x, const QuadratureSpec& quad)
{
    const FracParams& fp = spec.params;
    const int n = fp.n();
    double r = 0.0;
    for (int k = 0; k < n; ++k) r += x[k] * x[k];
    r = std::sqrt(r);
    switch (spec.family) {
    case BarrierFamily::half_space: {
        double t = 0.0;
        for (int k = 0; k < n; ++k) t += spec.normal[k] * x[k];
        ProfileParams pp;
        pp.beta = spec.beta;
        Result line = eval_profile_1d_estimate(Profile::make(ProfileFamily::power_positive_part, pp), t,
                                               fp.with_dim(1), quad);
        double N = dead_variable_closed_form(n, fp.sp());
        return {N * line.value, N * line.error};
    }
    case BarrierFamily::smooth_cutoff: {
        Result d = cutoff_operator_deficit(spec.R, r, fp, quad.profile_tolerance);
        return {-d.value, d.error};
    }
    default:
        break;
    }
    if (n == 1) return eval_profile_1d_estimate(spec.profile(), x[0], fp, quad);
    if (n == 3) return radial_reduce_3d_estimate(spec.profile(), r, fp, quad);
    throw std::invalid_argument("barrier_operator: no evaluator for this family in this dimension");
}

CertificateReport certify_barrier(const BarrierSpec& spec, const QuadratureSpec& quad)
{
    const FracParams& fp = spec.params;
    const double s = fp.s(), p = fp.p(), q = fp.sp();
    const int n = fp.n();
    CertificateReport rep;
    rep.subject = barrier_tag(spec.family);
    rep.relation = "<=";
    rep.data["beta"] = spec.beta;
    rep.data["s"] = s;
    rep.data["p"] = p;
    rep.data["n"] = n;
    rep.tolerances["profile_tolerance"] = quad.profile_tolerance;

    auto axis_point = [n](double r) {
        Point x{0.0, 0.0, 0.0};
        x[0] = r;
        (void)n;
        return x;
    };
    auto sample = [&](const Point& x, double bound, std::vector<double> label) {
        try {
            Result v = barrier_operator(spec, x, quad);
            rep.add(std::move(label), v.value, bound, v.error);
        } catch (const std::exception& e) {
            rep.fail(std::string("evaluation failed: ") + e.what());
        }
    };

    switch (spec.family) {
    case BarrierFamily::power_positive_part:
        for (double x : {0.25, 0.5, 1.0, 2.0}) sample(axis_point(x), 0.0, {x});
        break;
    case BarrierFamily::truncated_minorant:
        for (double t : {0.01, 0.03, 0.1, 0.3}) sample(axis_point(t * spec.L), 0.0, {t * spec.L});
        break;
    case BarrierFamily::half_space: {
        // tangential offsets do not change the value; sample off the normal line anyway
        Point tangent{0.0, 0.0, 0.0};
        tangent[0] = -spec.normal[1];
        tangent[1] = spec.normal[0];
        for (double t : {0.25, 0.5, 1.0}) {
            Point x{0.0, 0.0, 0.0};
            for (int k = 0; k < n; ++k) x[k] = t * spec.normal[k] + 0.3 * tangent[k];
            sample(x, 0.0, std::vector<double>(x.begin(), x.begin() + n));
        }
        break;
    }
    case BarrierFamily::cone: {
        // touching half-space functions give ℒk(x) <= -N C (1 - |x|)^{β(p-1)-sp}
        double C = 0.0;
        if (spec.beta < s) {
            C = power_constant(spec.beta, s, p, nullptr) * (n == 1 ? 1.0 : dead_variable_closed_form(n, q));
            rep.data["C_beta_s_p_n"] = C;
        }
        for (double t : {0.1, 0.4, 0.7, 0.9, 0.99, 0.999}) {
            double r = t * spec.R;
            double bound = -C * std::pow(spec.R, -q) * std::pow(1.0 - t, spec.beta * (p - 1.0) - q);
            sample(axis_point(r), bound, {r});
        }
        break;
    }
    case BarrierFamily::ring:
        rep.bound = -1.0;
        for (double t : {1e-4, 1e-3, 1e-2}) sample(axis_point(spec.r0 * (1.0 + t)), -1.0, {spec.r0 * (1.0 + t)});
        break;
    case BarrierFamily::shell_1d:
        for (double t : {1e-4, 1e-3, 1e-2}) sample(axis_point(spec.r0 * (1.0 + t)), 0.0, {spec.r0 * (1.0 + t)});
        break;
    case BarrierFamily::indicator_ball:
        if (q >= 1.0) rep.fail("indicator barrier needs sp < 1");
        for (double t : {0.0, 0.5, 0.9}) {
            double r = t * spec.R;
            if (n == 3 && r == 0.0) r = 0.05 * spec.R;
            sample(axis_point(r), 0.0, {r});
        }
        break;
    case BarrierFamily::smooth_cutoff: {
        CutoffMargin cm = cutoff_supersolution_margin(spec.R, fp);
        rep.data["margin"] = cm.margin;
        rep.data["certified_bound"] = cm.certified_bound;
        for (double t : {0.0, 0.5, 1.0}) {
            double r = t * spec.R;
            sample(axis_point(r), -cm.certified_bound, {r});
        }
        break;
    }
    }
    if (spec.uses_beta() && spec.beta > s) rep.notes.push_back("beta > s: the sign claim is not expected to hold");
    rep.finalize();
    return rep;
}

// ---------------------------------------------------------------------------------------------
// power constant

Result power_constant_estimate(double beta, double s, double p)
{
    check_sp(s, p);
    require(beta > 0.0, "beta must be positive");
    require(beta <= s, "power constant needs beta <= s (the sign flips for beta > s)");
    Result I = main_integral(beta, s, p);
    double f = -2.0 * beta * (p - 1.0) / (s * p);
    return {f * I.value, std::abs(f) * I.error};
}

double power_constant(double beta, double s, double p, ConstantTable* table)
{
    Result r = power_constant_estimate(beta, s, p);
    if (table)
        table->record("C", {{"beta", beta}, {"s", s}, {"p", p}},
                      ConstantEntry{r.value, "tanh-sinh, u = t^beta and 1 - t = w^k", r.error, "tanh-sinh"});
    return r.value;
}

// ---------------------------------------------------------------------------------------------
// truncated minorant

CertificateReport minorant_bracket(double L, const FracParams& params, const QuadratureSpec& quad)
{
    require(L > 0.0, "L must be positive");
    require(params.n() == 1, "minorant bracket is one-dimensional");
    const double s = params.s(), p = params.p(), q = params.sp();
    const double hi = -(p - 1.0) / q * std::pow(L, -s);
    const double lo = 4.0 * hi;

    ProfileParams pp;
    pp.beta = s;
    pp.L = L;
    Profile ell = Profile::make(ProfileFamily::truncated_minorant, pp);

    CertificateReport rep;
    rep.subject = "truncated-minorant bracket";
    rep.relation = "<=";
    rep.bound = hi;
    rep.data["L"] = L;
    rep.data["lower"] = lo;
    rep.data["upper"] = hi;

    // x/L = 0.5 * 2^{-k/2}, searched from the top; δ is the first sample (going up) where the bracket breaks
    std::vector<double> ts;
    for (int k = 0; k <= 28; ++k) ts.push_back(0.5 * std::pow(2.0, -0.5 * k));
    std::vector<Result> vals(ts.size());
    std::vector<char> ok(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        vals[i] = eval_profile_1d_estimate(ell, ts[i] * L, params, quad);
        if (2.0 * vals[i].error > hi - lo) throw std::runtime_error("minorant_bracket: quadrature error exceeds bracket width");
        ok[i] = vals[i].value - 2.0 * vals[i].error > lo && vals[i].value + 2.0 * vals[i].error < hi;
    }
    double delta = 0.0;
    std::size_t first_ok = ts.size();
    for (std::size_t j = ts.size(); j-- > 0;) {
        if (!ok[j]) {
            delta = ts[j];
            break;
        }
        first_ok = j;
        delta = ts[j];
    }
    if (first_ok == ts.size()) {
        delta = 0.0;
        rep.fail("bracket fails at the smallest sampled x/L");
    }
    rep.data["delta"] = delta;
    for (std::size_t i = first_ok; i < ts.size(); ++i) {
        CertificateSample& smp = rep.add({ts[i] * L}, vals[i].value, hi, vals[i].error);
        smp.ok = smp.ok && vals[i].value > lo;
    }
    rep.finalize();
    return rep;
}

// ---------------------------------------------------------------------------------------------
// ring and shell

RingDecomposition ring_decomposition_unchecked(double beta, double s, double p, double r0, double r)
{
    check_sp(s, p);
    require(beta > 0.0 && beta <= s, "ring decomposition needs 0 < beta <= s");
    require(r0 > 0.0, "r0 must be positive");
    require(r > r0, "ring decomposition needs r > r0");
    const double q = s * p;
    const double e = p * (s - beta);
    const double rho = r - r0;
    const double a = 2.0 * r0 / rho;
    const double ratio = rho / r;
    const double w = worst(s, p);

    RingDecomposition d;
    Result I = main_integral(beta, s, p);
    Result II = beta_weight_integral(beta, p, w, [&](double t, double omt) {
        return std::pow(1.0 + t + a, -q) + (t == 0.0 ? 0.0 : std::exp(e * log_t(t, omt))) * std::pow(1.0 + t + a * t, -q);
    });
    Result III = beta_weight_integral(beta, p, w, [&](double t, double omt) { return brace(t + a, t, omt, q); });
    Result IV = beta_weight_integral(beta, p, w, [&](double t, double omt) {
        if (t == 0.0) return 0.0;
        return std::exp((e - 1.0) * log_t(t, omt)) * brace(t + a * t, t, omt, q);
    });
    d.I = I.value;
    d.II = II.value;
    d.III = ratio * III.value;
    d.IV = ratio * IV.value;
    d.prefactor = 4.0 * std::numbers::pi / (1.0 + q) * beta * (p - 1.0) / q * std::pow(rho, beta * (p - 1.0) - q);
    d.total = d.prefactor * (d.I + d.II + d.III + d.IV);
    d.error = std::abs(d.prefactor) * (I.error + II.error + ratio * (III.error + IV.error));
    return d;
}

RingDecomposition ring_decomposition(double beta, double s, double p, double r0, double r)
{
    require(beta < s, "ring decomposition needs beta < s");
    return ring_decomposition_unchecked(beta, s, p, r0, r);
}

RingDelta find_ring_delta(double beta, double s, double p, double r0, ConstantTable* table)
{
    check_sp(s, p);
    require(beta > 0.0 && beta <= s, "find_ring_delta needs 0 < beta <= s");
    RingDelta out;
    CertificateReport& rep = out.report;
    rep.subject = "ring delta";
    rep.relation = "<=";
    rep.bound = -1.0;

    auto passes = [&](double rho, RingDecomposition* keep) {
        RingDecomposition d = ring_decomposition_unchecked(beta, s, p, r0, r0 + rho);
        if (keep) *keep = d;
        return d.total + 2.0 * d.error <= -1.0;
    };

    // ladder ρ_k = r0 1e-8 2^{k/2} up to 10 r0
    std::vector<double> ladder;
    for (double rho = 1e-8 * r0; rho <= 10.0 * r0; rho *= std::sqrt(2.0)) ladder.push_back(rho);
    std::size_t k = 0;
    std::vector<RingDecomposition> seen;
    for (; k < ladder.size(); ++k) {
        RingDecomposition d;
        bool ok = passes(ladder[k], &d);
        seen.push_back(d);
        if (!ok) break;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) rep.add({r0 + ladder[i]}, seen[i].total, -1.0, seen[i].error);
    if (k == 0) {
        rep.fail("total > -1 at the finest sampled r - r0");
        rep.finalize();
        return out;
    }
    double lo = ladder[k - 1];
    if (k < ladder.size()) {
        double hi = ladder[k];
        for (int it = 0; it < 40 && hi - lo > 1e-10 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (passes(mid, nullptr) ? lo : hi) = mid;
        }
        // the samples above the last passing ladder point were failures; drop the one that failed
        rep.samples.pop_back();
    }
    out.delta = lo;
    rep.data["delta"] = lo;
    rep.finalize();
    if (table && rep.verdict)
        table->record("ring_delta", {{"beta", beta}, {"s", s}, {"p", p}, {"r0", r0}},
                      ConstantEntry{lo, "ladder + bisection on total <= -1", 1e-10 * lo, "tanh-sinh"});
    return out;
}

ShellDecomposition shell_1d_decomposition_unchecked(double beta, double s, double p, double x)
{
    check_sp(s, p);
    require(beta > 0.0 && beta <= s, "shell decomposition needs 0 < beta <= s");
    require(std::abs(x) > 1.0, "shell decomposition needs |x| > 1");
    const double q = s * p;
    const double e = p * (s - beta);
    const double rho = std::abs(x) - 1.0;
    const double a = 2.0 / rho;
    const double w = worst(s, p);
    Result first = main_integral(beta, s, p);
    Result second = beta_weight_integral(beta, p, w, [&](double t, double) { return std::pow(1.0 + t + a, -q); });
    Result third = beta_weight_integral(beta, p, w, [&](double t, double omt) {
        if (t == 0.0) return 0.0;
        return std::pow(1.0 + t + a * t, -q) * std::exp(e * log_t(t, omt));
    });
    ShellDecomposition d;
    d.first = first.value;
    d.second = second.value;
    d.third = third.value;
    d.prefactor = 2.0 * beta * (p - 1.0) / q * std::pow(rho, beta * (p - 1.0) - q);
    d.total = d.prefactor * (d.first + d.second + d.third);
    d.error = std::abs(d.prefactor) * (first.error + second.error + third.error);
    return d;
}

ShellDecomposition shell_1d_decomposition(double beta, double s, double p, double x)
{
    require(beta < s, "shell decomposition needs beta < s");
    return shell_1d_decomposition_unchecked(beta, s, p, x);
}

// ---------------------------------------------------------------------------------------------
// bounded cutoff

Result cutoff_operator_deficit(double R, double r, const FracParams& params, double tolerance)
{
    require(R > 0.0, "R must be positive");
    require(r >= 0.0 && r <= R * (1.0 + 1e-14), "need 0 <= r <= R");
    r = std::min(r, R);
    const int n = params.n();
    const double p = params.p(), q = params.sp();

    // ∫_{ρ0}^{∞} (1 - C(x + ρ e))^{p-1} ρ^{-1-q} dρ for the direction with cos(angle to x) = c
    auto ray = [&](double c) -> Result {
        double s2 = std::max(0.0, 1.0 - c * c);
        double rho0 = -r * c + std::sqrt(std::max(0.0, R * R - r * r * s2));
        double rho1 = -r * c + std::sqrt(4.0 * R * R - r * r * s2);
        auto f = [&](double rho, double, double) {
            double y = std::sqrt(std::max(0.0, r * r + rho * rho + 2.0 * r * rho * c));
            double one_minus_C = smoothstep5((y - R) / R);
            if (one_minus_C <= 0.0) return 0.0;
            return std::pow(one_minus_C, p - 1.0) * std::pow(rho, -1.0 - q);
        };
        Result ramp = quadrature::tanh_sinh(f, rho0, rho1, tolerance);
        return {ramp.value + std::pow(rho1, -q) / q, ramp.error};
    };

    Result total{0.0, 0.0};
    if (n == 1) {
        Result a = ray(1.0), b = ray(-1.0);
        total = {a.value + b.value, a.error + b.error};
    } else {
        // ∫ over directions: n = 2 uses θ on [0, π] twice, n = 3 uses 2π sinθ dθ
        double err = 0.0;
        auto g = [&](double th, double, double) {
            Result rr = ray(std::cos(th));
            err = std::max(err, rr.error);
            return (n == 2 ? 2.0 : 2.0 * std::numbers::pi * std::sin(th)) * rr.value;
        };
        Result ang = quadrature::tanh_sinh(g, 0.0, std::numbers::pi, tolerance);
        total = {ang.value, ang.error + err * sphere_area(n)};
    }
    return {2.0 * total.value, 2.0 * total.error};
}

CutoffMargin cutoff_supersolution_margin(double R, const FracParams& params)
{
    require(R > 0.0, "R must be positive");
    const int n = params.n();
    const double q = params.sp();
    CutoffMargin out;
    out.margin = INFINITY;
    for (int k = 0; k <= 16; ++k) {
        double r = R * k / 16.0;
        Result d = cutoff_operator_deficit(R, r, params);
        if (d.value < out.margin) {
            out.margin = d.value;
            out.argmin = r;
        }
        out.error = std::max(out.error, d.error);
    }
    const double tail = sphere_area(n) * std::pow(2.0 * R, -q) / q;
    out.certified_bound = 2.0 * std::pow(2.0 / 3.0, n + q) * tail;
    out.stated_minorant = std::pow(2.0, n + q) * tail;

    CertificateReport& rep = out.report;
    rep.subject = "smooth-cutoff margin";
    rep.relation = ">=";
    rep.bound = out.certified_bound;
    rep.add({out.argmin}, out.margin, out.certified_bound, out.error);
    rep.data["margin"] = out.margin;
    rep.data["certified_bound"] = out.certified_bound;
    rep.data["stated_minorant"] = out.stated_minorant;
    if (out.margin < out.stated_minorant)
        rep.notes.push_back("computed margin is below the far-field minorant with |y - x| replaced by |y|/2");
    rep.finalize();
    return out;
}

// ---------------------------------------------------------------------------------------------
// right-hand-side lemmas

CertificateReport lemma_simple_check(double p)
{
    require(p > 1.0, "p must exceed 1");
    CertificateReport rep;
    rep.subject = "simple lemma";
    rep.relation = ">=";
    double best = INFINITY, best_a = 0.0, best_M = 0.0;
    const int nM = 200, na = 400;
    for (int i = 0; i < nM; ++i) {
        double M = 3.0 * std::pow(100.0 / 3.0, double(i) / (nM - 1));
        for (int j = 0; j < na; ++j) {
            double a = -2.0 + (M + 2.0) * j / (na - 1);
            double v = (phi_p(a + M, p) - phi_p(a, p)) / std::pow(M, p - 1.0);
            if (v < best) {
                best = v;
                best_a = a;
                best_M = M;
            }
        }
    }
    rep.add({best_a, best_M}, best, 0.0);
    rep.data["c_p"] = best;
    rep.data["argmin_a"] = best_a;
    rep.data["argmin_M"] = best_M;
    rep.finalize();
    return rep;
}

RhsModification rhs_modify(const GridFunction& u, double M, const FracParams& params, const QuadratureSpec& quad)
{
    const Grid& g = u.grid();
    const int n = g.dim();
    require(n == params.n(), "dimension mismatch");
    require(g.half_width() >= 4.0, "grid must contain B_4");
    auto c = tail_constant(u.tail());
    require(c.has_value(), "rhs_modify needs a constant tail");

    auto radius = [&](const Point& x) {
        double r2 = 0.0;
        for (int k = 0; k < n; ++k) r2 += x[k] * x[k];
        return std::sqrt(r2);
    };
    const double eps = 1e-12;
    if (std::abs(*c) > 1.0 + eps) throw std::domain_error("rhs_modify: |u| <= 1 outside B_1 fails on the tail");
    std::vector<std::size_t> inner;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double r = radius(g.coord(i));
        if (r >= 1.0) {
            if (std::abs(u[i]) > 1.0 + eps) throw std::domain_error("rhs_modify: |u| <= 1 outside B_1 fails");
        } else {
            if (u[i] < -1.0 - eps) throw std::domain_error("rhs_modify: u >= -1 in B_1 fails");
            inner.push_back(i);
        }
    }
    for (std::size_t i : inner) {
        PvEvaluation ev = eval_pv_detailed(u, i, params, quad);
        if (ev.value - ev.error_estimate > 1.0) throw std::domain_error("rhs_modify: Lu <= 1 in B_1 fails");
    }
    const double need = std::max(3.0, 2.0 * std::max(u.sup_norm(), std::abs(*c)));
    if (M < need) throw std::invalid_argument("rhs_modify: M must be at least max(3, 2 sup|u|)");

    ProfileParams pp;
    pp.inner = 2.0;
    pp.outer = 4.0;
    pp.value_in = 0.0;
    pp.value_out = 1.0;
    Profile eta = Profile::make(ProfileFamily::smooth_step, pp);
    std::vector<double> vals(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) vals[i] = u[i] - M * eta.value(g.coord(i), n);
    RhsModification out{GridFunction(g, std::move(vals), ConstantTail{*c - M}), {}};

    CertificateReport& rep = out.report;
    rep.subject = "rhs modification";
    rep.relation = "<=";
    rep.data["M"] = M;
    double margin = INFINITY;
    for (std::size_t i : inner) {
        PvEvaluation ev = eval_pv_detailed(out.u, i, params, quad);
        Point x = g.coord(i);
        rep.add(std::vector<double>(x.begin(), x.begin() + n), ev.value, 0.0, ev.error_estimate);
        margin = std::min(margin, -ev.value);
    }
    rep.data["margin"] = margin;
    rep.finalize();
    return out;
}

GridFunction inf_convolution(const GridFunction& v, double eps)
{
    require(eps > 0.0, "inf_convolution needs eps > 0");
    auto c = tail_constant(v.tail());
    require(c.has_value(), "inf_convolution supports constant tails only");
    const Grid& g = v.grid();
    const int n = g.dim();
    const double L = g.half_width();
    const double k = 0.5 / eps;

    std::vector<Point> xs(g.size());
    std::vector<double> dist_out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        xs[i] = g.coord(i);
        double d = INFINITY;
        for (int a = 0; a < n; ++a) d = std::min(d, L - std::abs(xs[i][a]));
        dist_out[i] = d;
    }
    for (std::size_t j = 0; j < g.size(); ++j)
        if (v[j] + k * dist_out[j] * dist_out[j] < *c)
            throw std::domain_error("inf_convolution: result outside the box is not the constant tail");

    std::vector<double> out(g.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(g.size()); ++i) {
        double best = *c + k * dist_out[i] * dist_out[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            double d2 = 0.0;
            for (int a = 0; a < n; ++a) d2 += (xs[i][a] - xs[j][a]) * (xs[i][a] - xs[j][a]);
            best = std::min(best, v[j] + k * d2);
        }
        out[i] = best;
    }
    return v.with_values(std::move(out));
}

}  // namespace nonlocal
