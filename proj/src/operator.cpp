#include "nonlocal/operator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "nonlocal/io.hpp"

namespace nonlocal {

using quadrature::Result;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

bool tabulated(int order)
{
    return order == 7 || order == 10 || order == 15 || order == 20 || order == 25 || order == 30;
}

}  // namespace

void QuadratureSpec::validate() const
{
    auto bad = [](const std::string& what) { throw std::invalid_argument("QuadratureSpec: " + what); };
    if (!(pv_cut > 0.0 && pv_cut <= 1.0)) bad("pv_cut must lie in (0, 1]");
    if (!(model_cut > 0.0 && model_cut <= 0.1)) bad("model_cut must lie in (0, 0.1]");
    if (near_field_depth < 1) bad("near_field_depth must be at least 1");
    for (int nodes : {subcell_nodes, face_nodes, radial_nodes})
        if (nodes < 8 || !tabulated(nodes)) bad("node counts must be one of 10, 15, 20, 25, 30");
    if (!(profile_tolerance > 0.0 && profile_tolerance < 1e-3)) bad("profile_tolerance must lie in (0, 1e-3)");
    if (profile_levels < 8 || profile_levels > 20) bad("profile_levels must lie in [8, 20]");
}

QuadratureSpec quadrature_preset(const std::string& name)
{
    QuadratureSpec q;
    q.name = name;
    if (name == "coarse") {
        q.near_field_depth = 4;
        q.subcell_nodes = 10;
        q.face_nodes = 10;
        q.radial_nodes = 15;
        q.profile_tolerance = 1e-8;
        q.profile_levels = 10;
    } else if (name == "standard") {
    } else if (name == "fine") {
        q.near_field_depth = 16;
        q.subcell_nodes = 20;
        q.face_nodes = 20;
        q.radial_nodes = 30;
        q.profile_tolerance = 1e-13;
        q.profile_levels = 15;
    } else {
        throw std::invalid_argument("unknown quadrature preset '" + name + "' (coarse, standard, fine)");
    }
    return q;
}

// ---------------------------------------------------------------------------------------------
// constant table

std::string ConstantTable::key(const std::string& name, const std::map<std::string, double>& params)
{
    std::string k = name + "(";
    bool first = true;
    for (const auto& [pk, pv] : params) {
        if (!first) k += ",";
        first = false;
        k += pk + "=" + format_double(pv);
    }
    return k + ")";
}

ConstantTable::ConstantTable(const ConstantTable& o)
{
    std::lock_guard<std::mutex> lock(o.mutex_);
    entries_ = o.entries_;
}

void ConstantTable::record(const std::string& name, const std::map<std::string, double>& params, ConstantEntry entry)
{
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[key(name, params)] = std::move(entry);
}

std::optional<ConstantEntry> ConstantTable::find(const std::string& k) const
{
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(k);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::size_t ConstantTable::size() const
{
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

nlohmann::json ConstantTable::to_json() const
{
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, e] : entries_)
        j[k] = {{"value", e.value}, {"method", e.method}, {"error_estimate", e.error_estimate}, {"quadrature", e.quadrature}};
    return j;
}

ConstantTable ConstantTable::from_json(const nlohmann::json& j)
{
    ConstantTable t;
    for (const auto& [k, v] : j.items())
        t.entries_[k] = ConstantEntry{v.at("value").get<double>(), v.at("method").get<std::string>(),
                                      v.at("error_estimate").get<double>(), v.at("quadrature").get<std::string>()};
    return t;
}

void ConstantTable::save(const std::string& path) const { write_json(to_json(), path); }

ConstantTable& ConstantTable::global()
{
    static ConstantTable table;
    return table;
}

// ---------------------------------------------------------------------------------------------
// pair weights

namespace {

struct CellMoments {
    double w = 0.0;
    Point m1{0.0, 0.0, 0.0};
    std::array<Point, 3> m2{};
};

// tensor Gauss over the unit cell around k, refined near the origin
CellMoments cell_moments(int n, double q, const std::array<int, 3>& k, const QuadratureSpec& quad)
{
    int kinf = 0;
    for (int d = 0; d < n; ++d) kinf = std::max(kinf, std::abs(k[d]));
    const int sub = kinf == 1 ? 4 : (kinf <= 3 ? 2 : 1);
    const auto& rule = quadrature::gauss_legendre(quad.subcell_nodes);
    std::vector<double> xs, ws;
    const double len = 1.0 / sub;
    for (int s = 0; s < sub; ++s) {
        double a = -0.5 + s * len;
        for (std::size_t g = 0; g < rule.x.size(); ++g) {
            xs.push_back(a + 0.5 * len * (rule.x[g] + 1.0));
            ws.push_back(0.5 * len * rule.w[g]);
        }
    }
    const int P = static_cast<int>(xs.size());
    const double e = -0.5 * (n + q);
    CellMoments out;
    const int P1 = n >= 2 ? P : 1;
    const int P2 = n >= 3 ? P : 1;
    for (int i2 = 0; i2 < P2; ++i2)
        for (int i1 = 0; i1 < P1; ++i1)
            for (int i0 = 0; i0 < P; ++i0) {
                Point z{xs[i0], n >= 2 ? xs[i1] : 0.0, n >= 3 ? xs[i2] : 0.0};
                double w = ws[i0] * (n >= 2 ? ws[i1] : 1.0) * (n >= 3 ? ws[i2] : 1.0);
                double r2 = 0.0;
                for (int d = 0; d < n; ++d) r2 += (k[d] + z[d]) * (k[d] + z[d]);
                double kw = w * std::pow(r2, e);
                out.w += kw;
                for (int a = 0; a < n; ++a) {
                    out.m1[a] += kw * z[a];
                    for (int b = 0; b < n; ++b) out.m2[a][b] += kw * z[a] * z[b];
                }
            }
    return out;
}

double cell_weight(int n, double q, const std::array<int, 3>& k, const QuadratureSpec& quad)
{
    if (n == 1) {
        double a = std::abs(k[0]);
        return (std::pow(a - 0.5, -q) - std::pow(a + 0.5, -q)) / q;
    }
    int kinf = 0;
    double r2 = 0.0;
    for (int d = 0; d < n; ++d) {
        kinf = std::max(kinf, std::abs(k[d]));
        r2 += double(k[d]) * k[d];
    }
    if (kinf > quad.near_field_depth) return std::pow(r2, -0.5 * (n + q));
    return cell_moments(n, q, k, quad).w;
}

}  // namespace

PairWeights::PairWeights(int n, double q, int extent, const QuadratureSpec& quad)
    : n_(n), q_(q), extent_(extent), depth_(std::min(extent, quad.near_field_depth))
{
    const std::size_t D = depth_ + 1;
    moments_.assign(9 * (n == 1 ? D : (n == 2 ? D * D : D * D * D)), 0.0);
    for (int c = 0; c <= (n >= 3 ? depth_ : 0); ++c)
        for (int b = 0; b <= (n >= 2 ? depth_ : 0); ++b)
            for (int a = 0; a <= depth_; ++a) {
                if (a == 0 && b == 0 && c == 0) continue;
                CellMoments cm = cell_moments(n, q, {a, b, c}, quad);
                double* out = &moments_[9 * (a + D * (b + D * c))];
                for (int i = 0; i < 3; ++i) out[i] = cm.m1[i];
                out[3] = cm.m2[0][0];
                out[4] = cm.m2[1][1];
                out[5] = cm.m2[2][2];
                out[6] = cm.m2[0][1];
                out[7] = cm.m2[0][2];
                out[8] = cm.m2[1][2];
            }

    const std::size_t E = extent + 1;
    const std::size_t size = n == 1 ? E : (n == 2 ? E * E : E * E * E);
    table_.assign(size, 0.0);
    const int hi1 = n >= 2 ? extent : 0;
    const int hi2 = n >= 3 ? extent : 0;
    // weights depend only on the sorted absolute offsets
    for (int c = 0; c <= hi2; ++c)
        for (int b = c; b <= std::max(hi1, c); ++b) {
            if (n == 2 && c != 0) continue;
            for (int a = (n == 1 ? 0 : b); a <= extent; ++a) {
                if (a == 0 && b == 0 && c == 0) continue;
                double w = cell_weight(n, q, {a, b, c}, quad);
                std::array<int, 3> v{a, b, c};
                std::sort(v.begin(), v.begin() + n);
                do {
                    std::size_t idx = v[0] + E * (v[1] + E * v[2]);
                    table_[idx] = w;
                } while (std::next_permutation(v.begin(), v.begin() + n));
            }
        }
}

double PairWeights::unit(int a, int b, int c) const
{
    const std::size_t E = extent_ + 1;
    a = std::abs(a);
    b = std::abs(b);
    c = std::abs(c);
    if (a > extent_ || b > extent_ || c > extent_) throw std::out_of_range("PairWeights: offset beyond table extent");
    return table_[a + E * (b + E * c)];
}

void PairWeights::moments(const std::array<int, 3>& k, Point& m1, std::array<Point, 3>& m2) const
{
    m1 = {0.0, 0.0, 0.0};
    m2 = {};
    std::array<int, 3> a{std::abs(k[0]), std::abs(k[1]), std::abs(k[2])};
    std::array<double, 3> sg{k[0] < 0 ? -1.0 : 1.0, k[1] < 0 ? -1.0 : 1.0, k[2] < 0 ? -1.0 : 1.0};
    if (std::max({a[0], a[1], a[2]}) <= depth_) {
        const std::size_t D = depth_ + 1;
        const double* v = &moments_[9 * (a[0] + D * (a[1] + D * a[2]))];
        for (int i = 0; i < n_; ++i) m1[i] = sg[i] * v[i];
        m2[0][0] = v[3];
        m2[1][1] = v[4];
        m2[2][2] = v[5];
        m2[0][1] = m2[1][0] = sg[0] * sg[1] * v[6];
        m2[0][2] = m2[2][0] = sg[0] * sg[2] * v[7];
        m2[1][2] = m2[2][1] = sg[1] * sg[2] * v[8];
        return;
    }
    // midpoint expansion of the kernel across the cell
    double r2 = 0.0;
    for (int i = 0; i < n_; ++i) r2 += double(k[i]) * k[i];
    const double K = std::pow(r2, -0.5 * (n_ + q_));
    for (int i = 0; i < n_; ++i) {
        m1[i] = -(n_ + q_) * K / r2 * k[i] / 12.0;
        m2[i][i] = K / 12.0;
    }
}

std::shared_ptr<const PairWeights> PairWeights::get(int n, double q, int extent, const QuadratureSpec& quad)
{
    using Key = std::tuple<int, double, int, int>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const PairWeights>> cache;
    Key key{n, q, quad.near_field_depth, quad.subcell_nodes};
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end() && it->second->extent() >= extent) return it->second;
    }
    auto built = std::shared_ptr<const PairWeights>(new PairWeights(n, q, extent, quad));
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[key];
    if (!slot || slot->extent() < extent) slot = built;
    return slot;
}

// ---------------------------------------------------------------------------------------------
// exterior of a box, in direction form

namespace {

struct Direction {
    Point dir;
    double R;
    double w;  // solid-angle weight
};

std::vector<Direction> exterior_directions(int n, const Point& dlo, const Point& dhi, int nodes)
{
    std::vector<Direction> out;
    const auto& rule = quadrature::gauss_legendre(nodes);
    for (int k = 0; k < n; ++k)
        for (int side = -1; side <= 1; side += 2) {
            const double a = side > 0 ? dhi[k] : dlo[k];
            Point nu{0.0, 0.0, 0.0};
            nu[k] = side;
            if (n == 1) {
                out.push_back({nu, a, 1.0});
                continue;
            }
            if (n == 2) {
                const int j = 1 - k;
                const double t1 = std::atan(-dlo[j] / a), t2 = std::atan(dhi[j] / a);
                for (std::size_t g = 0; g < rule.x.size(); ++g) {
                    double th = 0.5 * (t1 + t2) + 0.5 * (t2 - t1) * rule.x[g];
                    Point d = nu;
                    d[k] *= std::cos(th);
                    d[j] = std::sin(th);
                    out.push_back({d, a / std::cos(th), 0.5 * (t2 - t1) * rule.w[g]});
                }
                continue;
            }
            const int j1 = (k + 1) % 3, j2 = (k + 2) % 3;
            for (int s1 = -1; s1 <= 1; s1 += 2)
                for (int s2 = -1; s2 <= 1; s2 += 2) {
                    const double X = s1 > 0 ? dhi[j1] : dlo[j1];
                    const double Y = s2 > 0 ? dhi[j2] : dlo[j2];
                    const double split = std::atan2(Y, X);
                    for (int tri = 0; tri < 2; ++tri) {
                        const double f1 = tri == 0 ? 0.0 : split;
                        const double f2 = tri == 0 ? split : 0.5 * std::numbers::pi;
                        for (std::size_t g = 0; g < rule.x.size(); ++g) {
                            double phi = 0.5 * (f1 + f2) + 0.5 * (f2 - f1) * rule.x[g];
                            double wphi = 0.5 * (f2 - f1) * rule.w[g];
                            double rho = tri == 0 ? X / std::cos(phi) : Y / std::sin(phi);
                            double psimax = std::atan(rho / a);
                            for (std::size_t l = 0; l < rule.x.size(); ++l) {
                                double psi = 0.5 * psimax * (rule.x[l] + 1.0);
                                double wpsi = 0.5 * psimax * rule.w[l];
                                Point d{0.0, 0.0, 0.0};
                                d[k] = side * std::cos(psi);
                                d[j1] = s1 * std::sin(psi) * std::cos(phi);
                                d[j2] = s2 * std::sin(psi) * std::sin(phi);
                                out.push_back({d, a / std::cos(psi), wphi * wpsi * std::sin(psi)});
                            }
                        }
                    }
                }
        }
    return out;
}

}  // namespace

ExteriorRule exterior_rule(const Point& x, const Point& dlo, const Point& dhi, const TailModel& tail,
                           const FracParams& params, const QuadratureSpec& quad)
{
    const int n = params.n();
    const double q = params.sp();
    const auto dirs = exterior_directions(n, dlo, dhi, quad.face_nodes);
    ExteriorRule rule;
    if (auto c = tail_constant(tail)) {
        double total = 0.0;
        for (const auto& d : dirs) total += d.w * std::pow(d.R, -q) / q;
        rule.values.push_back(*c);
        rule.weights.push_back(total);
        return rule;
    }
    check_tail_admissible(tail, params);
    const double alpha = tail_growth(tail) * (params.p() - 1.0) / q;
    const double kappa = 1.0 / (1.0 - alpha);
    const auto& radial = quadrature::gauss_legendre(quad.radial_nodes);
    for (const auto& d : dirs) {
        const double base = d.w * std::pow(d.R, -q) / q;
        for (std::size_t g = 0; g < radial.x.size(); ++g) {
            double u = 0.5 * (radial.x[g] + 1.0);
            double w = std::pow(u, kappa);
            double jac = kappa * std::pow(u, kappa - 1.0) * 0.5 * radial.w[g];
            double r = d.R * std::pow(w, -1.0 / q);
            if (!std::isfinite(r)) continue;
            Point y = x;
            for (int k = 0; k < n; ++k) y[k] += r * d.dir[k];
            rule.values.push_back(tail_value(tail, y, n));
            rule.weights.push_back(base * jac);
        }
    }
    return rule;
}

// ---------------------------------------------------------------------------------------------
// central cell

namespace {

// (Φ(1 + σ) - Φ(1 - σ)) / σ
double odd_difference_ratio(double sigma, double p)
{
    const double alpha = p - 1.0;
    if (std::abs(sigma) < 0.05) {
        double coeff = alpha;  // C(α, 1)
        double pw = 1.0;       // σ^{k-1}
        double sum = 0.0;
        for (int k = 1; k < 40; k += 2) {
            double term = coeff * pw;
            sum += term;
            if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
            coeff *= (alpha - k) * (alpha - k - 1.0) / ((k + 1.0) * (k + 2.0));
            pw *= sigma * sigma;
        }
        return 2.0 * sum;
    }
    return (phi_p(1.0 + sigma, p) - phi_p(1.0 - sigma, p)) / sigma;
}

}  // namespace

double paired_ray_integral(double A, double S, double p, double q, double tolerance)
{
    if (S == 0.0) return 0.0;
    const double a = std::abs(A);
    if (a == 0.0) {
        double e = 2.0 * (p - 1.0) - q;
        if (e <= 0.0) return std::copysign(kInf, S);
        return 2.0 * phi_p(S, p) / e;
    }
    const double ap = std::pow(a, p - 1.0);
    const double tstar = a / std::abs(S);
    const double ratio = S / a;
    auto integrand = [&](double t, double gap) {
        double sigma = t * ratio;
        double v = std::abs(sigma) < 0.05 ? odd_difference_ratio(sigma, p)
                                          : (phi_p(1.0 + std::abs(sigma), p) - phi_p(gap, p)) / std::abs(sigma);
        return ap * ratio * v;
    };
    // t = w^{1/(p-q)} removes the t^{p-1-q} endpoint singularity; gaps to the kink come from endpoint distances
    const double e = 1.0 / (p - q);
    const double t0 = std::min(tstar, 1.0);
    const double w0 = std::pow(t0, p - q);
    auto inner = [&](double w, double, double db) {
        double t = std::pow(w, e);
        double gap = tstar <= 1.0 ? -std::expm1(e * std::log1p(-db / w0)) : 1.0 - t / tstar;
        return e * integrand(t, gap);
    };
    double total = quadrature::tanh_sinh(inner, 0.0, w0, tolerance).value;
    if (tstar < 1.0) {
        auto outer = [&](double t, double da, double) { return std::pow(t, p - 1.0 - q) * integrand(t, -da / tstar); };
        total += quadrature::tanh_sinh(outer, tstar, 1.0, tolerance).value;
    }
    return total;
}

namespace {

struct Taylor {
    Point g{0.0, 0.0, 0.0};
    std::array<Point, 3> H{};
};

double central_cell(int n, double h, const Taylor& t, double p, double q, const QuadratureSpec& quad)
{
    const double hh = 0.5 * h;
    const double tol = std::min(1e-10, quad.profile_tolerance * 10.0);
    auto ray = [&](const Point& z) {
        double A = 0.0, S = 0.0;
        for (int a = 0; a < n; ++a) {
            A += t.g[a] * z[a];
            for (int b = 0; b < n; ++b) S += z[a] * t.H[a][b] * z[b];
        }
        return paired_ray_integral(hh * A, 0.5 * hh * hh * S, p, q, tol);
    };
    double acc = 0.0;
    if (n == 1) {
        acc = ray(Point{1.0, 0.0, 0.0});
    } else {
        const auto& rule = quadrature::gauss_legendre(quad.face_nodes);
        const std::size_t G = rule.x.size();
        for (int k = 0; k < n; ++k) {
            const int j1 = (k + 1) % n, j2 = (k + 2) % n;
            for (std::size_t i = 0; i < G; ++i) {
                if (n == 2) {
                    Point z{0.0, 0.0, 0.0};
                    z[k] = 1.0;
                    z[j1] = rule.x[i];
                    double r2 = 1.0 + z[j1] * z[j1];
                    acc += rule.w[i] * std::pow(r2, -0.5 * (n + q)) * ray(z);
                    continue;
                }
                for (std::size_t l = 0; l < G; ++l) {
                    Point z{0.0, 0.0, 0.0};
                    z[k] = 1.0;
                    z[j1] = rule.x[i];
                    z[j2] = rule.x[l];
                    double r2 = 1.0 + z[j1] * z[j1] + z[j2] * z[j2];
                    acc += rule.w[i] * rule.w[l] * std::pow(r2, -0.5 * (n + q)) * ray(z);
                }
            }
        }
    }
    return std::pow(hh, -q) * acc;
}

}  // namespace

PvEvaluation eval_pv_detailed(const GridFunction& u, std::size_t node, const FracParams& params,
                              const QuadratureSpec& quad)
{
    const Grid& grid = u.grid();
    const int n = grid.dim();
    if (params.n() != n) throw std::invalid_argument("eval_pv: parameter dimension does not match the grid");
    if (node >= grid.size() || grid.on_box_boundary(node))
        throw std::invalid_argument("eval_pv: evaluation point must be a node strictly inside the box");
    const int m = grid.m();
    const double h = grid.spacing();
    const double p = params.p();
    const double q = params.sp();
    const auto mi = grid.multi_index(node);
    const Point x = grid.coord(node);
    const double u0 = u[node];

    auto value_at = [&](int a, int b, int c) {
        std::array<int, 3> t{mi[0] + a, mi[1] + b, mi[2] + c};
        bool inside = true;
        for (int k = 0; k < n; ++k) inside = inside && t[k] >= 0 && t[k] < m;
        if (inside) return u[grid.index(t)];
        Point y = x;
        y[0] += a * h;
        y[1] += b * h;
        y[2] += c * h;
        return tail_value(u.tail(), y, n);
    };

    const int E = m - 1;
    auto weights = PairWeights::get(n, q, E, quad);
    const double hq = std::pow(h, -q);
    const int E1 = n >= 2 ? E : 0;
    const int E2 = n >= 3 ? E : 0;
    // leading error of the cell rule: F = Φ(u - u0) expanded to second order across each cell
    auto F = [&](int a, int b, int c) { return phi_p(value_at(a, b, c) - u0, p); };
    auto cell_correction = [&](const std::array<int, 3>& k) {
        Point m1;
        std::array<Point, 3> m2;
        weights->moments(k, m1, m2);
        const double f0 = F(k[0], k[1], k[2]);
        double corr = 0.0;
        for (int i = 0; i < n; ++i) {
            std::array<int, 3> e{0, 0, 0};
            e[i] = 1;
            double fp = F(k[0] + e[0], k[1] + e[1], k[2] + e[2]);
            double fm = F(k[0] - e[0], k[1] - e[1], k[2] - e[2]);
            corr += 0.5 * (fp - fm) * m1[i] + 0.5 * (fp - 2.0 * f0 + fm) * m2[i][i];
            for (int j = i + 1; j < n; ++j) {
                std::array<int, 3> d{0, 0, 0};
                d[j] = 1;
                double pp = F(k[0] + e[0] + d[0], k[1] + e[1] + d[1], k[2] + e[2] + d[2]);
                double pm = F(k[0] + e[0] - d[0], k[1] + e[1] - d[1], k[2] + e[2] - d[2]);
                double mp = F(k[0] - e[0] + d[0], k[1] - e[1] + d[1], k[2] - e[2] + d[2]);
                double mm = F(k[0] - e[0] - d[0], k[1] - e[1] - d[1], k[2] - e[2] - d[2]);
                corr += 0.25 * (pp - pm - mp + mm) * m2[i][j];
            }
        }
        return corr;
    };
    double sum = 0.0;
    double cell_error = 0.0;
    // pair k with -k; k runs over the half lattice whose last nonzero component is positive
    for (int c = 0; c <= E2; ++c)
        for (int b = (c > 0 ? -E1 : 0); b <= E1; ++b)
            for (int a = ((c > 0 || b > 0) ? -E : 1); a <= E; ++a) {
                double w = weights->unit(a, b, c);
                double up = value_at(a, b, c);
                double dn = value_at(-a, -b, -c);
                sum += hq * w * (phi_p(up - u0, p) + phi_p(dn - u0, p));
                cell_error += hq * (cell_correction({a, b, c}) + cell_correction({-a, -b, -c}));
            }

    Point d{0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) d[k] = (m - 0.5) * h;
    ExteriorRule rule = exterior_rule(x, d, d, u.tail(), params, quad);
    double far = 0.0;
    for (std::size_t i = 0; i < rule.values.size(); ++i) far += rule.weights[i] * phi_p(rule.values[i] - u0, p);

    auto taylor = [&](int step) {
        Taylor t;
        const double hs = step * h;
        for (int k = 0; k < n; ++k) {
            std::array<int, 3> e{0, 0, 0};
            e[k] = step;
            double up = value_at(e[0], e[1], e[2]);
            double dn = value_at(-e[0], -e[1], -e[2]);
            t.g[k] = (up - dn) / (2.0 * hs);
            t.H[k][k] = (up - 2.0 * u0 + dn) / (hs * hs);
            for (int l = k + 1; l < n; ++l) {
                std::array<int, 3> f{0, 0, 0};
                f[l] = step;
                double pp = value_at(e[0] + f[0], e[1] + f[1], e[2] + f[2]);
                double pm = value_at(e[0] - f[0], e[1] - f[1], e[2] - f[2]);
                double mp = value_at(-e[0] + f[0], -e[1] + f[1], -e[2] + f[2]);
                double mm = value_at(-e[0] - f[0], -e[1] - f[1], -e[2] - f[2]);
                t.H[k][l] = t.H[l][k] = (pp - pm - mp + mm) / (4.0 * hs * hs);
            }
        }
        return t;
    };
    const double central = central_cell(n, h, taylor(1), p, q, quad);
    const double central2 = central_cell(n, h, taylor(2), p, q, quad);

    PvEvaluation out;
    out.value = 2.0 * (sum + far + central);
    out.near_field = 2.0 * central;
    out.far_field = 2.0 * far;
    out.residual_bound = 2.0 * std::abs(central - central2);
    out.cell_error = 2.0 * cell_error;
    out.error_estimate = out.residual_bound + 2.0 * std::abs(out.cell_error);
    return out;
}

double eval_pv(const GridFunction& u, std::size_t node, const FracParams& params, const QuadratureSpec& quad)
{
    return eval_pv_detailed(u, node, params, quad).value;
}

double eval_pv(const GridFunction& u, const Point& x, const FracParams& params, const QuadratureSpec& quad)
{
    auto node = u.grid().node_at(x, 1e-9 * u.grid().spacing());
    if (!node) throw std::invalid_argument("eval_pv: evaluation point is not a grid node");
    return eval_pv(u, *node, params, quad);
}

// ---------------------------------------------------------------------------------------------
// one-variable principal values

namespace {

struct LineKernel {
    double lower = -kInf;
    double c_x = 1.0;   // c(x)
    double dc_x = 0.0;  // c'(x)
    // c(y) dist^{-1-q} + e(y) with dist = |y - x|
    std::function<double(double y, double dist)> full;
};

Result line_pv(const Profile& f, double x, double p, double q, const QuadratureSpec& quad, const LineKernel& K)
{
    quad.validate();
    if (!f.has_line_form()) throw std::invalid_argument("profile has no one-variable form");
    std::vector<double> breaks;
    for (double b : f.line_breaks(x))
        if (b > K.lower) breaks.push_back(b);
    if (std::isfinite(K.lower)) breaks.insert(breaks.begin(), K.lower);
    const double kink_tol = 1e-13 * std::max(1.0, std::abs(x));
    double d = kInf;
    for (double b : breaks) {
        if (std::abs(b - x) <= kink_tol) throw std::invalid_argument("evaluation point sits at a kink of the profile");
        d = std::min(d, std::abs(b - x));
    }
    if (!std::isfinite(d)) d = std::max(1.0, std::abs(x));

    const double tol = quad.profile_tolerance;
    const int levels = quad.profile_levels;
    const double eps = quad.pv_cut * d;
    const double hT = quad.model_cut * eps;
    const double d1 = f.line_d1(x);
    const double d2 = f.line_d2(x);

    Result total;
    // Taylor model on (0, hT]
    double inner = K.c_x * std::pow(hT, -q) * paired_ray_integral(d1 * hT, 0.5 * d2 * hT * hT, p, q, tol);
    if (d1 != 0.0) inner += K.dc_x * 2.0 * phi_p(d1, p) * std::pow(hT, p - q) / (p - q);
    total.value += inner;
    total.error += std::abs(inner) * (hT / d) * (hT / d);

    // paired actual increments on [hT, eps]
    auto near = [&](double h, double, double) {
        double dp = f.line_increment(x, h);
        double dm = f.line_increment(x, -h);
        return phi_p(dp, p) * K.full(x + h, h) + phi_p(dm, p) * K.full(x - h, h);
    };
    Result r = quadrature::tanh_sinh(near, hT, eps, tol, levels);
    total.value += r.value;
    total.error += r.error;

    auto far = [&](double y) {
        double dist = std::abs(y - x);
        return phi_p(f.line_increment(x, y - x), p) * K.full(y, dist);
    };
    auto panel = [&](double a, double b) {
        if (!(b > a)) return;
        Result pr = quadrature::tanh_sinh([&](double y, double, double) { return far(y); }, a, b, tol, levels);
        total.value += pr.value;
        total.error += pr.error;
    };

    // left of x - eps
    double cursor = x - eps;
    for (auto it = breaks.rbegin(); it != breaks.rend(); ++it) {
        if (*it >= cursor) continue;
        panel(*it, cursor);
        cursor = *it;
    }
    if (!std::isfinite(K.lower)) {
        Result ray = quadrature::algebraic_ray(far, x, x - cursor, q, -1.0, tol, levels);
        total.value += ray.value;
        total.error += ray.error;
    }
    // right of x + eps
    cursor = x + eps;
    for (double b : breaks) {
        if (b <= cursor) continue;
        panel(cursor, b);
        cursor = b;
    }
    Result ray = quadrature::algebraic_ray(far, x, cursor - x, q, 1.0, tol, levels);
    total.value += ray.value;
    total.error += ray.error;
    return total;
}

}  // namespace

Result eval_profile_1d_estimate(const Profile& profile, double x, const FracParams& params, const QuadratureSpec& quad)
{
    const double q = params.sp();
    LineKernel K;
    K.full = [q](double, double dist) { return std::pow(dist, -1.0 - q); };
    Result r = line_pv(profile, x, params.p(), q, quad, K);
    return {2.0 * r.value, 2.0 * r.error};
}

double eval_profile_1d(const Profile& profile, double x, const FracParams& params, const QuadratureSpec& quad)
{
    return eval_profile_1d_estimate(profile, x, params, quad).value;
}

Result radial_reduce_3d_estimate(const Profile& profile, double r, const FracParams& params, const QuadratureSpec& quad)
{
    if (params.n() != 3) throw std::invalid_argument("radial_reduce_3d: needs n = 3");
    if (!(r > 0.0)) throw std::invalid_argument("radial_reduce_3d: r must be positive");
    if (!profile.is_radial()) throw std::invalid_argument("radial_reduce_3d: profile is not radial");
    const Point& c = profile.params().center;
    if (profile.family() != ProfileFamily::pointwise_min && (c[0] != 0.0 || c[1] != 0.0 || c[2] != 0.0))
        throw std::invalid_argument("radial_reduce_3d: profile must be centred at the origin");
    const double q = params.sp();
    const double gamma = profile.growth_exponent();
    if (gamma > 0.0 && !(gamma * (params.p() - 1.0) < q))
        throw std::invalid_argument("radial_reduce_3d: profile growth is not integrable against the kernel");

    LineKernel K;
    K.lower = 0.0;
    K.c_x = r;
    K.dc_x = 1.0;
    K.full = [q, r](double rho, double dist) {
        if (rho > 2.0 * r) {
            // rho [(rho - r)^{-1-q} - (rho + r)^{-1-q}] without cancellation
            double u = r / rho;
            double a = std::expm1(-(1.0 + q) * std::log1p(-u));
            double b = std::expm1(-(1.0 + q) * std::log1p(u));
            return std::pow(rho, -q) * (a - b);
        }
        return rho * (std::pow(dist, -1.0 - q) - std::pow(rho + r, -1.0 - q));
    };
    Result res = line_pv(profile, r, params.p(), q, quad, K);
    const double scale = 4.0 * std::numbers::pi / (r * (1.0 + q));
    return {scale * res.value, scale * res.error};
}

double radial_reduce_3d(const Profile& profile, double r, const FracParams& params, const QuadratureSpec& quad)
{
    return radial_reduce_3d_estimate(profile, r, params, quad).value;
}

// ---------------------------------------------------------------------------------------------
// dead-variable constant

double dead_variable_closed_form(int n, double q)
{
    if (n < 2) throw std::invalid_argument("dead-variable constant needs n >= 2");
    return std::pow(std::numbers::pi, 0.5 * (n - 1)) * std::tgamma(0.5 * (1.0 + q)) / std::tgamma(0.5 * (n + q));
}

double dead_variable_constant(const FracParams& params, const QuadratureSpec& quad, ConstantTable* table)
{
    const int n = params.n();
    if (n < 2) throw std::invalid_argument("dead-variable constant needs n >= 2");
    const double q = params.sp();
    // z = tan θ: |S^{n-2}| ∫_0^{π/2} sin^{n-2}θ cos^q θ dθ
    auto f = [&](double th, double, double db) { return std::pow(std::sin(th), n - 2) * std::pow(std::sin(db), q); };
    Result r = quadrature::tanh_sinh(f, 0.0, 0.5 * std::numbers::pi, quad.profile_tolerance, quad.profile_levels);
    const double sphere = n == 2 ? 2.0 : 2.0 * std::numbers::pi;
    const double value = sphere * r.value;
    const double err = std::max(sphere * r.error, std::abs(value - dead_variable_closed_form(n, q)));
    if (table)
        table->record("N", {{"n", double(n)}, {"sp", q}}, ConstantEntry{value, "tanh-sinh, z = tan(theta)", err, quad.name});
    return value;
}

// ---------------------------------------------------------------------------------------------
// Caccioppoli diagnostic

double gagliardo_ball_sum(const GridFunction& u, double r, const FracParams& params, const QuadratureSpec& quad)
{
    const Grid& g = u.grid();
    const int n = g.dim();
    const double h = g.spacing();
    const double q = params.sp();
    const double p = params.p();
    std::vector<std::size_t> ball;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Point x = g.coord(i);
        double r2 = 0.0;
        for (int k = 0; k < n; ++k) r2 += x[k] * x[k];
        if (std::sqrt(r2) < r - 1e-12 * h) ball.push_back(i);
    }
    auto W = PairWeights::get(n, q, g.m() - 1, quad);
    const double scale = std::pow(h, n - q);
    double total = 0.0;
    for (std::size_t a = 0; a < ball.size(); ++a) {
        auto ma = g.multi_index(ball[a]);
        double row = 0.0;
        for (std::size_t b = 0; b < ball.size(); ++b) {
            if (a == b) continue;
            auto mb = g.multi_index(ball[b]);
            double d = std::abs(u[ball[a]] - u[ball[b]]);
            if (d == 0.0) continue;
            row += W->unit(mb[0] - ma[0], mb[1] - ma[1], mb[2] - ma[2]) * std::pow(d, p);
        }
        total += row;
    }
    return scale * total;
}

// the cutoff-gradient scaling (R - r)^{-p} made dimensionless against the left side's R^{-sp}
double caccioppoli_default_constant(const FracParams& params, double r, double R)
{
    if (!(r > 0.0 && r < R)) throw std::invalid_argument("caccioppoli_default_constant: need 0 < r < R");
    const double p = params.p();
    return std::pow(R, p * (1.0 - params.s())) * std::pow(R - r, -p);
}

CertificateReport caccioppoli_gap(const GridFunction& u, const GridFunction& f, double r, double R,
                                  const FracParams& params, const QuadratureSpec& quad, std::optional<double> constant)
{
    if (!(r > 0.0 && r < R)) throw std::invalid_argument("caccioppoli_gap: need 0 < r < R");
    if (!(u.grid() == f.grid())) throw std::invalid_argument("caccioppoli_gap: grid mismatch");
    const Grid& g = u.grid();
    const int n = g.dim();
    const double h = g.spacing();
    const double hn = g.cell_volume();
    const double p = params.p();
    const double q = params.sp();

    const double left = gagliardo_ball_sum(u, r, params, quad);

    double t1 = 0.0, ext = 0.0, fnorm = 0.0;
    const double pstar = q < n ? n * p / (n - q) : kInf;
    const double pdual = std::isfinite(pstar) ? pstar / (pstar - 1.0) : 1.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Point x = g.coord(i);
        double r2 = 0.0;
        for (int k = 0; k < n; ++k) r2 += x[k] * x[k];
        double rad = std::sqrt(r2);
        if (rad < R) {
            t1 += hn * std::pow(std::abs(u[i]), p);
            fnorm += hn * std::pow(std::abs(f[i]), pdual);
        } else {
            ext += hn * std::pow(std::abs(u[i]), p - 1.0) * std::pow(rad, -n - q);
        }
    }
    Point d{0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) d[k] = g.half_width() + 0.5 * h;
    ExteriorRule rule = exterior_rule(Point{}, d, d, u.tail(), params, quad);
    for (std::size_t i = 0; i < rule.values.size(); ++i)
        ext += rule.weights[i] * std::pow(std::abs(rule.values[i]), p - 1.0);
    const double t2 = std::pow(ext, p / (p - 1.0));
    const double t3 = std::pow(std::pow(fnorm, 1.0 / pdual), p / (p - 1.0));
    const double right = t1 + t2 + t3;
    const double C = constant.value_or(caccioppoli_default_constant(params, r, R));

    CertificateReport rep;
    rep.subject = "caccioppoli";
    rep.relation = "<=";
    rep.bound = C * right;
    rep.add({r}, left);
    rep.data = {{"left", left}, {"T1", t1}, {"T2", t2}, {"T3", t3}, {"right", right}, {"constant", C},
                {"ratio", right > 0.0 ? left / right : (left > 0.0 ? kInf : 0.0)}, {"r", r}, {"R", R}};
    rep.tolerances = {{"margin", 0.0}};
    rep.finalize();
    return rep;
}

}  // namespace nonlocal
