#pragma once

#include <functional>
#include <vector>

namespace nonlocal::quadrature {

struct Rule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// tabulated orders: 7, 10, 15, 20, 25, 30
const Rule& gauss_legendre(int order);

struct Result {
    double value = 0.0;
    double error = 0.0;
};

// f(t, da, db) with da = t - a and db = b - t computed without cancellation
using EndpointIntegrand = std::function<double(double, double, double)>;

// double-exponential rule; tolerates integrable algebraic singularities at a and b
Result tanh_sinh(const EndpointIntegrand& f, double a, double b, double tolerance, int max_levels = 15);

// ∫_{x+D}^{∞} F(y) |y-x|^{-1-q}-type integrals after y = x + D w^{-1/q}: returns ∫_0^1 G(w) dw where
// G(w) = F(x + D w^{-1/q}) * (D/q) w^{-1/q-1}
Result algebraic_ray(const std::function<double(double)>& F, double x, double D, double q, double direction,
                     double tolerance, int max_levels = 15);

}  // namespace nonlocal::quadrature
