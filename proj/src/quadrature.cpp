#include "nonlocal/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace nonlocal::quadrature {

namespace {

template <int N>
Rule expand()
{
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    Rule r;
    // boost stores the nonnegative half; zero is the first abscissa for odd N
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] == 0.0) continue;
        r.x.push_back(-a[i]);
        r.w.push_back(w[i]);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.x.push_back(a[i]);
        r.w.push_back(w[i]);
    }
    return r;
}

boost::math::quadrature::tanh_sinh<double>& integrator(int max_levels)
{
    thread_local std::map<int, std::unique_ptr<boost::math::quadrature::tanh_sinh<double>>> cache;
    auto& slot = cache[max_levels];
    if (!slot) slot = std::make_unique<boost::math::quadrature::tanh_sinh<double>>(max_levels);
    return *slot;
}

}  // namespace

const Rule& gauss_legendre(int order)
{
    static const Rule r7 = expand<7>();
    static const Rule r10 = expand<10>();
    static const Rule r15 = expand<15>();
    static const Rule r20 = expand<20>();
    static const Rule r25 = expand<25>();
    static const Rule r30 = expand<30>();
    switch (order) {
    case 7: return r7;
    case 10: return r10;
    case 15: return r15;
    case 20: return r20;
    case 25: return r25;
    case 30: return r30;
    default: throw std::invalid_argument("gauss_legendre: untabulated order " + std::to_string(order));
    }
}

Result tanh_sinh(const EndpointIntegrand& f, double a, double b, double tolerance, int max_levels)
{
    Result r;
    if (!(b > a)) return r;
    const double len = b - a;
    auto g = [&](double t, double tc) -> double {
        double da, db;
        if (tc < 0.0) {
            da = -tc;
            db = len - da;
        } else {
            db = tc;
            da = len - db;
        }
        double v = f(t, da, db);
        return std::isfinite(v) ? v : 0.0;
    };
    double L1 = 0.0;
    r.value = integrator(max_levels).integrate(g, a, b, tolerance, &r.error, &L1);
    return r;
}

Result algebraic_ray(const std::function<double(double)>& F, double x, double D, double q, double direction,
                     double tolerance, int max_levels)
{
    auto g = [&](double w, double, double) -> double {
        double stretch = std::pow(w, -1.0 / q);
        if (!std::isfinite(stretch)) return 0.0;
        double y = x + direction * D * stretch;
        if (!std::isfinite(y)) return 0.0;
        return F(y) * (D / q) * stretch / w;
    };
    return tanh_sinh(g, 0.0, 1.0, tolerance, max_levels);
}

}  // namespace nonlocal::quadrature
