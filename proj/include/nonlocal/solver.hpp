#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonlocal/core.hpp"
#include "nonlocal/operator.hpp"

namespace nonlocal {

// J(v) = (1/p) Σ_{i≠j} W_ij |v_i - v_j|^p + (2/p) Σ_{i∈Ω} h^n Σ_k w_ik |v_i - g_k|^p - h^n Σ_{i∈Ω} f_i v_i
// over ordered pairs with at least one node in Ω; w_ik, g_k is the exterior rule of node i outside the grid box.
class DiscreteEnergy {
public:
    DiscreteEnergy(const DomainMask& omega, const GridFunction& g, const GridFunction& f, const FracParams& params,
                   const QuadratureSpec& quad = quadrature_preset("standard"));

    const Grid& grid() const noexcept { return grid_; }
    const FracParams& params() const noexcept { return params_; }
    const std::vector<std::size_t>& interior() const noexcept { return interior_; }
    bool is_interior(std::size_t node) const { return slot_[node] >= 0; }
    // W_ij
    double weight(std::size_t i, std::size_t j) const;
    double source(std::size_t interior_slot) const { return f_[interior_slot]; }
    // Σ_j 2 W_ij + 2 h^n Σ_k w_ik: the p = 2 row sum
    const std::vector<double>& row_sums() const noexcept { return diag_; }
    double cell_volume() const noexcept { return hn_; }

    double energy(const std::vector<double>& v) const;
    // gradient over interior nodes, in interior order
    std::vector<double> gradient(const std::vector<double>& v) const;
    // J(v + α d) - J(v) without cancellation against J(v); d is over interior nodes
    double energy_change(const std::vector<double>& v, const std::vector<double>& d, double alpha) const;

private:
    struct Tail {
        std::vector<double> values;
        std::vector<double> weights;
    };
    template <class Fn>
    double pair_sum(std::size_t node, Fn&& term) const;

    Grid grid_;
    FracParams params_;
    std::vector<std::size_t> interior_;
    std::vector<std::ptrdiff_t> slot_;
    std::vector<double> f_;
    std::vector<double> wtab_;  // W by |offset| per axis
    std::vector<Tail> tails_;
    std::vector<double> diag_;
    double hn_ = 0.0;
};

double energy(const GridFunction& v, const DiscreteEnergy& E);
std::vector<double> energy_gradient(const GridFunction& v, const DiscreteEnergy& E);

struct SolverConfig {
    // sup over interior nodes of |∂J/∂v_i| / h^n, i.e. the Euler-Lagrange residual in operator units;
    // unset means 1e-8 scale for p >= 2 and 1e-6 scale for p < 2, scale = max(1, sup|f|)
    std::optional<double> tolerance;
    int max_iterations = 20000;
    int memory = 12;
    QuadratureSpec quad = quadrature_preset("standard");
    // full-grid starting values; interior entries are used, the rest are overwritten by the data
    std::optional<std::vector<double>> initial;

    double resolved_tolerance(const FracParams& params, double f_scale) const;
};

struct SolveReport {
    int iterations = 0;
    double energy = 0.0;
    double gradient_sup = 0.0;
    double residual_l2 = 0.0;
    double tolerance = 0.0;
    double wall_time = 0.0;
    bool converged = false;
    std::string status;
    std::vector<double> energy_history;
};

struct SolveResult {
    GridFunction u;
    SolveReport report;
};

// exterior data: values of g at nodes outside Ω and g's tail; f is read on Ω
SolveResult solve_dirichlet(const GridFunction& f, const GridFunction& g, const DomainMask& omega,
                            const FracParams& params, const SolverConfig& config = {});

enum class ObstacleSide { above, below };

// minimizes J over {v >= ψ on Ω} (or v <= ψ), with exterior data ψ
SolveResult solve_obstacle(const GridFunction& psi, const GridFunction& f, const DomainMask& omega,
                           const FracParams& params, ObstacleSide side = ObstacleSide::above,
                           const SolverConfig& config = {});

// comparison check v >= u; the hypotheses f_u <= f_v on Ω and v >= u outside Ω are checked first.
// An unmet hypothesis leaves the verdict false with data["applicable"] = 0 and clause "inapplicable: ...".
CertificateReport comparison_check(const GridFunction& u, const GridFunction& v, const GridFunction& f_u,
                                   const GridFunction& f_v, const DomainMask& omega, double tolerance);

}  // namespace nonlocal
