#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nonlocal/core.hpp"
#include "nonlocal/quadrature.hpp"

namespace nonlocal {

struct QuadratureSpec {
    std::string name = "standard";
    // PV cut of the line evaluator, as a fraction of the distance from x to the nearest kink
    double pv_cut = 1.0;
    // inner part of the PV cut handled by the second-order Taylor model
    double model_cut = 1e-3;
    // offsets with |k|_inf <= depth get sub-cell Gauss weights; the rest use the midpoint kernel
    int near_field_depth = 8;
    int subcell_nodes = 15;
    int face_nodes = 15;
    int radial_nodes = 20;
    double profile_tolerance = 1e-11;
    int profile_levels = 12;

    void validate() const;
};

QuadratureSpec quadrature_preset(const std::string& name);

struct ConstantEntry {
    double value = 0.0;
    std::string method;
    double error_estimate = 0.0;
    std::string quadrature;
};

// Single-writer table of computed constants, keyed by "name(k1=v1,k2=v2)".
class ConstantTable {
public:
    ConstantTable() = default;
    ConstantTable(const ConstantTable& o);
    ConstantTable& operator=(const ConstantTable&) = delete;

    static std::string key(const std::string& name, const std::map<std::string, double>& params);

    void record(const std::string& name, const std::map<std::string, double>& params, ConstantEntry entry);
    std::optional<ConstantEntry> find(const std::string& key) const;
    std::size_t size() const;

    nlohmann::json to_json() const;
    static ConstantTable from_json(const nlohmann::json& j);
    void save(const std::string& path) const;

    static ConstantTable& global();

private:
    mutable std::mutex mutex_;
    std::map<std::string, ConstantEntry> entries_;
};

// w(k) = ∫_{cell k} |y|^{-n-q} dy for the unit lattice; W_ij = h^{n-q} w(j - i)
class PairWeights {
public:
    static std::shared_ptr<const PairWeights> get(int n, double q, int extent, const QuadratureSpec& quad);

    int dim() const noexcept { return n_; }
    int extent() const noexcept { return extent_; }
    double unit(int a, int b = 0, int c = 0) const;
    // ∫_{cell k} (z - k) |z|^{-n-q} dz and ∫_{cell k} (z - k)(z - k)^T |z|^{-n-q} dz
    void moments(const std::array<int, 3>& k, Point& m1, std::array<Point, 3>& m2) const;

private:
    PairWeights(int n, double q, int extent, const QuadratureSpec& quad);

    int n_;
    double q_;
    int extent_;
    int depth_;
    std::vector<double> table_;
    std::vector<double> moments_;  // 9 per |k| triple inside the near-field depth
};

// Quadrature for ∫_{outside box} F(u(y)) |y - x|^{-n-q} dy; box faces at distance dlo[k], dhi[k] from x.
// For a constant tail the rule has a single entry (value, total weight).
struct ExteriorRule {
    std::vector<double> values;
    std::vector<double> weights;
};

ExteriorRule exterior_rule(const Point& x, const Point& dlo, const Point& dhi, const TailModel& tail,
                           const FracParams& params, const QuadratureSpec& quad);

// ∫_0^1 [Φ_p(tA + t²S) + Φ_p(-tA + t²S)] t^{-1-q} dt; +-inf when divergent
double paired_ray_integral(double A, double S, double p, double q, double tolerance = 1e-12);

struct PvEvaluation {
    double value = 0.0;
    double near_field = 0.0;
    double far_field = 0.0;
    double residual_bound = 0.0;
    // second-order indicator of the cell-rule error (not applied to value)
    double cell_error = 0.0;
    double error_estimate = 0.0;
};

PvEvaluation eval_pv_detailed(const GridFunction& u, std::size_t node, const FracParams& params,
                              const QuadratureSpec& quad);
double eval_pv(const GridFunction& u, std::size_t node, const FracParams& params, const QuadratureSpec& quad);
double eval_pv(const GridFunction& u, const Point& x, const FracParams& params, const QuadratureSpec& quad);

quadrature::Result eval_profile_1d_estimate(const Profile& profile, double x, const FracParams& params,
                                            const QuadratureSpec& quad);
double eval_profile_1d(const Profile& profile, double x, const FracParams& params, const QuadratureSpec& quad);

// n = 3 radial reduction, r > 0
quadrature::Result radial_reduce_3d_estimate(const Profile& profile, double r, const FracParams& params,
                                             const QuadratureSpec& quad);
double radial_reduce_3d(const Profile& profile, double r, const FracParams& params, const QuadratureSpec& quad);

// N(n, q) = ∫_{R^{n-1}} (1 + |z|^2)^{-(n+q)/2} dz
double dead_variable_closed_form(int n, double q);
double dead_variable_constant(const FracParams& params, const QuadratureSpec& quad = quadrature_preset("standard"),
                              ConstantTable* table = &ConstantTable::global());

// constant multiplying the right-hand side when no explicit value is given
double caccioppoli_default_constant(const FracParams& params, double r, double R);

CertificateReport caccioppoli_gap(const GridFunction& u, const GridFunction& f, double r, double R,
                                  const FracParams& params, const QuadratureSpec& quad = quadrature_preset("standard"),
                                  std::optional<double> constant = std::nullopt);

// Σ_{i,j in B_r, i != j} W_ij |u_i - u_j|^p
double gagliardo_ball_sum(const GridFunction& u, double r, const FracParams& params, const QuadratureSpec& quad);

}  // namespace nonlocal
