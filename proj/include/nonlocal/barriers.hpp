#pragma once

#include <string>
#include <vector>

#include "nonlocal/core.hpp"
#include "nonlocal/operator.hpp"

namespace nonlocal {

enum class BarrierFamily {
    power_positive_part,  // (x_+)^β, 1D
    truncated_minorant,   // ℓ(x) = min(x_+^β, L^β), 1D
    half_space,           // (ν·x)_+^β
    cone,                 // (1 - |x|)_+^β
    ring,                 // (|x| - r0)_+^β, n = 3
    shell_1d,             // (|x| - r0)_+^β, 1D
    indicator_ball,       // 1 on B_R, needs sp < 1
    smooth_cutoff,        // C(R)
};

std::string barrier_tag(BarrierFamily f);
BarrierFamily barrier_from_tag(const std::string& tag);
std::vector<BarrierFamily> all_barrier_families();

struct BarrierSpec {
    BarrierFamily family = BarrierFamily::power_positive_part;
    FracParams params{0.5, 2.0, 1};
    double beta = 0.25;
    double r0 = 1.0;
    double R = 1.0;
    double L = 1.0;
    Point normal{1.0, 0.0, 0.0};

    // enforces 0 < β < s (β = s allowed for the minorant) and sp < 1 for the indicator
    static BarrierSpec make(BarrierFamily family, const FracParams& params, double beta, double r0 = 1.0,
                            double R = 1.0, double L = 1.0, Point normal = {1.0, 0.0, 0.0});
    // same fields without the invariants, for probing the failure side
    static BarrierSpec unchecked(BarrierFamily family, const FracParams& params, double beta, double r0 = 1.0,
                                 double R = 1.0, double L = 1.0, Point normal = {1.0, 0.0, 0.0});

    bool uses_beta() const noexcept;
    Profile profile() const;
};

// the barrier's operator value at a sampled point of its claimed region, with a quadrature error estimate
quadrature::Result barrier_operator(const BarrierSpec& spec, const Point& x, const QuadratureSpec& quad);

// sign certificate on the claimed region
CertificateReport certify_barrier(const BarrierSpec& spec, const QuadratureSpec& quad = quadrature_preset("standard"));

// C(β,s,p) with ℒ(x_+)^β = -C x^{β(p-1)-sp}
double power_constant(double beta, double s, double p, ConstantTable* table = &ConstantTable::global());
quadrature::Result power_constant_estimate(double beta, double s, double p);

CertificateReport minorant_bracket(double L, const FracParams& params,
                                   const QuadratureSpec& quad = quadrature_preset("standard"));

struct RingDecomposition {
    double I = 0.0;
    double II = 0.0;
    double III = 0.0;
    double IV = 0.0;
    double prefactor = 0.0;
    double total = 0.0;
    double error = 0.0;
};

RingDecomposition ring_decomposition(double beta, double s, double p, double r0, double r);
// no β < s check; β = s gives I = 0
RingDecomposition ring_decomposition_unchecked(double beta, double s, double p, double r0, double r);

struct RingDelta {
    double delta = 0.0;
    CertificateReport report;
};

RingDelta find_ring_delta(double beta, double s, double p, double r0, ConstantTable* table = &ConstantTable::global());

struct ShellDecomposition {
    double first = 0.0;
    double second = 0.0;
    double third = 0.0;
    double prefactor = 0.0;
    double total = 0.0;
    double error = 0.0;
};

ShellDecomposition shell_1d_decomposition(double beta, double s, double p, double x);
ShellDecomposition shell_1d_decomposition_unchecked(double beta, double s, double p, double x);

struct CutoffMargin {
    // min over |x| <= R of -ℒC(x)
    double margin = 0.0;
    double argmin = 0.0;
    // 2 (2/3)^{n+sp} ∫_{|y|>2R} |y|^{-n-sp} dy
    double certified_bound = 0.0;
    // ∫_{|y|>2R} (|y|/2)^{-n-sp} dy
    double stated_minorant = 0.0;
    double error = 0.0;
    CertificateReport report;
};

// -ℒC(x) at |x| = r <= R along the first axis
quadrature::Result cutoff_operator_deficit(double R, double r, const FracParams& params, double tolerance = 1e-11);
CutoffMargin cutoff_supersolution_margin(double R, const FracParams& params);

CertificateReport lemma_simple_check(double p);

struct RhsModification {
    GridFunction u;
    CertificateReport report;
};

// η = 0 on B_2, 1 outside B_4; the grid must contain B_4 and u must have a constant tail
RhsModification rhs_modify(const GridFunction& u, double M, const FracParams& params,
                           const QuadratureSpec& quad = quadrature_preset("standard"));

// min over nodes and the constant tail of v(y) + |x - y|^2 / (2ε)
GridFunction inf_convolution(const GridFunction& v, double eps);

}  // namespace nonlocal
