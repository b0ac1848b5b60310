#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonlocal/core.hpp"
#include "nonlocal/solver.hpp"

namespace nonlocal {

struct SolverFailure : std::runtime_error {
    SolveReport report;
    SolverFailure(const std::string& what, SolveReport rep) : std::runtime_error(what), report(std::move(rep)) {}
};

struct PerronConfig {
    SolverConfig solver;
    int max_sweeps = 50;
    // full-sweep sup change that stops the iteration; unset means 10x the resolved solver tolerance
    std::optional<double> sweep_tolerance;
    std::vector<int> layers = {3, 2, 1};

    double resolved_sweep_tolerance(const FracParams& params, double f_scale) const;
};

// one Poisson modification inside a sweep
struct LevelLog {
    int sweep = 0;
    int level = 0;
    std::size_t nodes = 0;
    int iterations = 0;
    // largest move against the envelope direction (an increase for the upper envelope)
    double wrong_way = 0.0;
    double change = 0.0;
};

struct Envelope {
    GridFunction u;
    std::vector<LevelLog> log;
    int sweeps = 0;
    bool converged = false;
    double monotone_tolerance = 0.0;
    SolveReport initial;
};

// v outside D, the solution with exterior data v and source f inside D
SolveResult poisson_modify(const GridFunction& v, const DomainMask& D, const GridFunction& f, const FracParams& params,
                           const SolverConfig& config = {});

Envelope upper_perron(const GridFunction& g, const GridFunction& f, const DomainMask& omega, const FracParams& params,
                      const PerronConfig& config = {});
Envelope lower_perron(const GridFunction& g, const GridFunction& f, const DomainMask& omega, const FracParams& params,
                      const PerronConfig& config = {});

struct RefinementRow {
    int m = 0;
    double h = 0.0;
    double gap = 0.0;
    double direct_difference = 0.0;
};

struct PerronReport {
    GridFunction upper;
    GridFunction lower;
    GridFunction direct;
    double gap = 0.0;
    // sup over Ω of |upper - direct| and |lower - direct|
    double direct_difference = 0.0;
    // most negative upper - lower over Ω
    double ordering_slack = 0.0;
    std::vector<LevelLog> upper_log;
    std::vector<LevelLog> lower_log;
    bool converged = true;
    double tolerance = 0.0;
    std::vector<RefinementRow> refinement;
    bool gap_decreasing = false;
};

PerronReport resolutivity_gap(const GridFunction& g, const GridFunction& f, const DomainMask& omega,
                              const FracParams& params, const PerronConfig& config = {});

// problem data rebuilt on every grid of a refinement ladder
struct PerronProblem {
    std::function<GridFunction(const Grid&)> g;
    std::function<GridFunction(const Grid&)> f;
    std::function<DomainMask(const Grid&)> omega;
};

// report of the finest grid, with one refinement row per entry of ms
PerronReport resolutivity_study(const PerronProblem& problem, int dim, double half_width, const std::vector<int>& ms,
                                const FracParams& params, const PerronConfig& config = {});

}  // namespace nonlocal
