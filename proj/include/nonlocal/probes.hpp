#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nonlocal/core.hpp"
#include "nonlocal/operator.hpp"
#include "nonlocal/solver.hpp"

namespace nonlocal {

enum class Verdict { attaining, ignoring, inconclusive };
std::string verdict_tag(Verdict v);

// Checks (i) ℒγ <= 0 at sampled nodes of Ω, (ii) γ > 0 at the nodes of Ω, (iii) γ decreasing to 0 along the
// grid approach to ξ0. Positivity is only sampled on Ω: barriers built from an exterior ball vanish inside it.
CertificateReport barrier_certificate_at(const Point& xi0, const GridFunction& gamma, const DomainMask& omega,
                                         const FracParams& params,
                                         const QuadratureSpec& quad = quadrature_preset("standard"));

// discrete solution of ℒω = -1 on r < |x - y0| < R, ω = 0 on |x - y0| <= r, ω = 1 outside
GridFunction ring_barrier(const Grid& grid, const Point& y0, double r, double R, const FracParams& params,
                          const SolverConfig& config = {});

// problem data rebuilt on every grid of a refinement ladder
struct RegularityProblem {
    int dim = 1;
    double half_width = 2.0;
    Point xi0{};
    // unit vector pointing from ξ0 into Ω
    Point direction{1.0, 0.0, 0.0};
    std::function<DomainMask(const Grid&)> omega;
    std::function<GridFunction(const Grid&)> g;
    std::function<GridFunction(const Grid&)> f;
    // Ω with ξ0 absorbed, whose solution is the field that ignores g(ξ0); unset when ξ0 is not isolated
    std::function<DomainMask(const Grid&)> reference_omega;
};

struct RegularityLevel {
    int m = 0;
    double h = 0.0;
    Point probe{};
    double distance = 0.0;
    double u = 0.0;
    // |u(x_k) - g(ξ0)|
    double discrepancy = 0.0;
    double reference_u = 0.0;
    // mean over Ω of |u - u_ref|
    double field_discrepancy = 0.0;
    // |g(ξ0) - u_ref(ξ0)|, or the oscillation of g outside Ω without a reference
    double jump = 0.0;
    int iterations = 0;
    std::vector<double> field;
};

struct RegularityReport {
    std::string label;
    Point xi0{};
    double target = 0.0;
    std::vector<RegularityLevel> levels;
    bool attaining_trend = false;
    bool ignoring_trend = false;
    Verdict verdict = Verdict::inconclusive;
    bool converged = true;
};

// fraction of the jump the last discrepancy must fall below
inline constexpr double verdict_threshold = 0.1;

// Level k probes ξ0 + j_k h_k direction with j_k = 4, 2, 1, 1, ...
// attaining: |u(x_k) - g(ξ0)| strictly decreasing and finally below 0.1 jump.
// ignoring: mean |u - u_ref| over Ω strictly decreasing and finally below 0.1 jump.
// Exactly one trend gives that verdict; none or both give inconclusive.
RegularityReport classify_regularity(const RegularityProblem& problem, const FracParams& params,
                                     const std::vector<int>& ms, const SolverConfig& config = {});

// Ω = (-1, 1) without the node at 0, g = 1 at that node and 0 elsewhere, constant source f
RegularityProblem puncture_problem(double f_value = 0.0);
// Ω = (-1, 1), ξ0 = 1, g equal to 1 near ξ0 and 0 on the far side
RegularityProblem exterior_sphere_problem(double f_value = 0.0);

inline const std::vector<int> default_ladder = {129, 257, 513};

std::vector<RegularityReport> puncture_experiment(const std::vector<FracParams>& params_list,
                                                  const std::vector<int>& ms = default_ladder,
                                                  const SolverConfig& config = {});

struct RhsIndependence {
    // f = -1, 0, 1
    std::array<RegularityReport, 3> reports;
    bool agree = false;
    // min over levels and nodes of u_{f=0} - u_{f=-1} and u_{f=1} - u_{f=0}
    double ordering_slack = 0.0;
    bool ordered = false;
};

// the problem's own f is replaced by -1, 0, 1
RhsIndependence rhs_independence_experiment(const RegularityProblem& problem, const FracParams& params,
                                            const std::vector<int>& ms = default_ladder,
                                            const SolverConfig& config = {});

// x0 outside Ω̄: u(x0) = g(x0) exactly on every level and the oscillation of u over the 3^n patch at x0
// shrinks under refinement
CertificateReport exterior_value_check(const Point& x0, const RegularityProblem& problem, const FracParams& params,
                                       const std::vector<int>& ms = default_ladder,
                                       const SolverConfig& config = {});

}  // namespace nonlocal
