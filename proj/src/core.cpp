#include "nonlocal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nonlocal {

double phi_p(double t, double p)
{
    if (!(p > 1.0)) throw std::invalid_argument("phi_p: p must exceed 1");
    if (t == 0.0) return 0.0;
    if (p == 2.0) return t;
    if (p == 3.0) return std::abs(t) * t;
    return std::copysign(std::pow(std::abs(t), p - 1.0), t);
}

FracParams::FracParams(double s, double p, int n) : s_(s), p_(p), n_(n), sp_(s * p)
{
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("FracParams: s must lie in (0,1)");
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("FracParams: p must exceed 1");
    if (n < 1 || n > 3) throw std::invalid_argument("FracParams: n must be 1, 2 or 3");
}

FracParams::SpBranch FracParams::sp_branch() const noexcept
{
    if (std::abs(sp_ - 1.0) <= 1e-12) return SpBranch::one;
    return sp_ < 1.0 ? SpBranch::below_one : SpBranch::above_one;
}

Grid::Grid(int dim, double half_width, int nodes_per_axis) : dim_(dim), L_(half_width), m_(nodes_per_axis)
{
    if (dim < 1 || dim > 3) throw std::invalid_argument("Grid: dimension must be 1, 2 or 3");
    if (!(half_width > 0.0)) throw std::invalid_argument("Grid: half width must be positive");
    if (nodes_per_axis < 3) throw std::invalid_argument("Grid: need at least 3 nodes per axis");
    h_ = 2.0 * L_ / (m_ - 1);
    cell_volume_ = std::pow(h_, dim_);
    size_ = 1;
    for (int k = 0; k < dim_; ++k) size_ *= static_cast<std::size_t>(m_);
}

std::array<int, 3> Grid::multi_index(std::size_t index) const
{
    std::array<int, 3> mi{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        mi[k] = static_cast<int>(index % m_);
        index /= m_;
    }
    return mi;
}

std::size_t Grid::index(const std::array<int, 3>& mi) const
{
    std::size_t idx = 0;
    for (int k = dim_ - 1; k >= 0; --k) idx = idx * m_ + static_cast<std::size_t>(mi[k]);
    return idx;
}

Point Grid::coord(std::size_t index) const
{
    auto mi = multi_index(index);
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) x[k] = axis_coord(mi[k]);
    return x;
}

bool Grid::on_box_boundary(std::size_t index) const
{
    auto mi = multi_index(index);
    for (int k = 0; k < dim_; ++k)
        if (mi[k] == 0 || mi[k] == m_ - 1) return true;
    return false;
}

std::optional<std::size_t> Grid::node_at(const Point& x, double tol) const
{
    std::array<int, 3> mi{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        double t = (x[k] + L_) / h_;
        long r = std::lround(t);
        if (r < 0 || r >= m_ || std::abs(t - r) * h_ > tol) return std::nullopt;
        mi[k] = static_cast<int>(r);
    }
    return index(mi);
}

double tail_value(const TailModel& tail, const Point& y, int n)
{
    if (auto c = std::get_if<ConstantTail>(&tail)) return c->value;
    if (auto pt = std::get_if<ProfileTail>(&tail)) return pt->profile.value(y, n);
    const auto& pd = std::get<PowerDecayTail>(tail);
    double r2 = 0.0;
    for (int k = 0; k < n; ++k) r2 += y[k] * y[k];
    return pd.base + pd.amplitude * std::pow(1.0 + r2, -0.5 * pd.exponent);
}

double tail_growth(const TailModel& tail)
{
    if (auto pt = std::get_if<ProfileTail>(&tail)) return pt->profile.growth_exponent();
    return 0.0;
}

std::optional<double> tail_constant(const TailModel& tail)
{
    if (auto c = std::get_if<ConstantTail>(&tail)) return c->value;
    return std::nullopt;
}

std::string tail_tag(const TailModel& tail)
{
    if (std::holds_alternative<ConstantTail>(tail)) return "constant";
    if (std::holds_alternative<ProfileTail>(tail)) return "profile";
    return "power-decay";
}

void check_tail_admissible(const TailModel& tail, const FracParams& params)
{
    double g = tail_growth(tail);
    if (g > 0.0 && !(g * (params.p() - 1.0) < params.sp()))
        throw std::invalid_argument("tail growth exponent " + std::to_string(g) +
                                    " is not integrable against the kernel (need growth*(p-1) < sp)");
    if (auto pd = std::get_if<PowerDecayTail>(&tail))
        if (!(pd->exponent > 0.0)) throw std::invalid_argument("power-decay tail needs a positive exponent");
}

GridFunction::GridFunction(Grid grid, std::vector<double> values, TailModel tail)
    : grid_(grid), values_(std::move(values)), tail_(std::move(tail))
{
    if (values_.size() != grid_.size()) throw std::invalid_argument("GridFunction: value count does not match grid");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: values must be finite");
}

double GridFunction::evaluate(const Point& x) const
{
    const int n = grid_.dim();
    const double L = grid_.half_width();
    for (int k = 0; k < n; ++k)
        if (x[k] < -L || x[k] > L) return tail_value(tail_, x, n);

    const double h = grid_.spacing();
    const int m = grid_.m();
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) {
        double t = (x[k] + L) / h;
        int i = std::min(static_cast<int>(std::floor(t)), m - 2);
        i = std::max(i, 0);
        base[k] = i;
        frac[k] = t - i;
    }
    double sum = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        std::array<int, 3> mi = base;
        for (int k = 0; k < n; ++k) {
            bool up = (corner >> k) & 1;
            mi[k] += up ? 1 : 0;
            w *= up ? frac[k] : 1.0 - frac[k];
        }
        if (w != 0.0) sum += w * values_[grid_.index(mi)];
    }
    return sum;
}

double GridFunction::sup_norm() const
{
    double s = 0.0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
}

GridFunction GridFunction::with_values(std::vector<double> values) const
{
    return GridFunction(grid_, std::move(values), tail_);
}

GridFunction GridFunction::negated() const
{
    std::vector<double> v(values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = -values_[i];
    TailModel t = tail_;
    if (auto c = std::get_if<ConstantTail>(&t)) {
        c->value = -c->value;
    } else if (auto pt = std::get_if<ProfileTail>(&t)) {
        if (pt->profile.family() == ProfileFamily::pointwise_min)
            throw std::invalid_argument("negated: pointwise-min tail has no closed negation");
        ProfileParams pp = pt->profile.params();
        pp.amplitude = -pp.amplitude;
        pt->profile = Profile::make(pt->profile.family(), pp);
    } else {
        auto& pd = std::get<PowerDecayTail>(t);
        pd.base = -pd.base;
        pd.amplitude = -pd.amplitude;
    }
    return GridFunction(grid_, std::move(v), std::move(t));
}

GridFunction constant_function(const Grid& grid, double c)
{
    return GridFunction(grid, std::vector<double>(grid.size(), c), ConstantTail{c});
}

namespace {

Profile as_profile(const TailModel& t)
{
    if (auto c = std::get_if<ConstantTail>(&t)) return Profile::constant(c->value);
    return std::get<ProfileTail>(t).profile;
}

bool same_power_decay(const TailModel& a, const TailModel& b)
{
    auto pa = std::get_if<PowerDecayTail>(&a);
    auto pb = std::get_if<PowerDecayTail>(&b);
    return pa && pb && pa->base == pb->base && pa->amplitude == pb->amplitude && pa->exponent == pb->exponent;
}

}  // namespace

GridFunction pointwise_min(const GridFunction& u, const GridFunction& v)
{
    if (!(u.grid() == v.grid())) throw std::invalid_argument("pointwise_min: grid mismatch");
    std::vector<double> w(u.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::min(u[i], v[i]);

    TailModel tail;
    const TailModel& a = u.tail();
    const TailModel& b = v.tail();
    if (std::holds_alternative<PowerDecayTail>(a) || std::holds_alternative<PowerDecayTail>(b)) {
        if (!same_power_decay(a, b))
            throw std::invalid_argument("pointwise_min: power-decay tails are only comparable with themselves");
        tail = a;
    } else if (auto ca = tail_constant(a), cb = tail_constant(b); ca && cb) {
        tail = ConstantTail{std::min(*ca, *cb)};
    } else {
        tail = ProfileTail{Profile::minimum(as_profile(a), as_profile(b))};
    }
    return GridFunction(u.grid(), std::move(w), std::move(tail));
}

GridFunction sample_profile(const Profile& profile, const Grid& grid)
{
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = profile.value(grid.coord(i), grid.dim());
    TailModel tail;
    if (auto c = profile.constant_beyond(grid.half_width(), grid.dim())) tail = ConstantTail{*c};
    else tail = ProfileTail{profile};
    return GridFunction(grid, std::move(v), std::move(tail));
}

GridFunction sample_profile(const std::string& tag, const std::map<std::string, double>& params, const Grid& grid)
{
    return sample_profile(Profile::make(tag, params), grid);
}

DomainMask::DomainMask(Grid grid, std::vector<char> flags) : grid_(grid), flags_(std::move(flags))
{
    if (flags_.size() != grid_.size()) throw std::invalid_argument("DomainMask: flag count does not match grid");
    for (std::size_t i = 0; i < flags_.size(); ++i) {
        if (!flags_[i]) continue;
        if (grid_.on_box_boundary(i)) throw std::invalid_argument("DomainMask: interior nodes must lie strictly inside the box");
        nodes_.push_back(i);
    }
}

DomainMask DomainMask::from_flags(const Grid& grid, std::vector<char> flags)
{
    return DomainMask(grid, std::move(flags));
}

namespace {

double distance_to(const Point& x, const Point& c, int n)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
    return std::sqrt(s);
}

}  // namespace

DomainMask DomainMask::ball(const Grid& grid, double radius, const Point& center)
{
    if (!(radius > 0.0)) throw std::invalid_argument("DomainMask::ball: radius must be positive");
    const double slack = 1e-9 * grid.spacing();
    std::vector<char> f(grid.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = !grid.on_box_boundary(i) && distance_to(grid.coord(i), center, grid.dim()) < radius - slack;
    return DomainMask(grid, std::move(f));
}

DomainMask DomainMask::box(const Grid& grid, double half_width)
{
    const double slack = 1e-9 * grid.spacing();
    std::vector<char> f(grid.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        Point x = grid.coord(i);
        bool in = !grid.on_box_boundary(i);
        for (int k = 0; k < grid.dim(); ++k) in = in && std::abs(x[k]) < half_width - slack;
        f[i] = in;
    }
    return DomainMask(grid, std::move(f));
}

DomainMask DomainMask::ring(const Grid& grid, double r_inner, double r_outer)
{
    if (!(r_inner >= 0.0 && r_outer > r_inner)) throw std::invalid_argument("DomainMask::ring: need 0 <= r_inner < r_outer");
    const double slack = 1e-9 * grid.spacing();
    std::vector<char> f(grid.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        double r = distance_to(grid.coord(i), Point{}, grid.dim());
        f[i] = !grid.on_box_boundary(i) && r > r_inner + slack && r < r_outer - slack;
    }
    return DomainMask(grid, std::move(f));
}

DomainMask DomainMask::punctured_ball(const Grid& grid, double radius, const Point& puncture)
{
    DomainMask b = ball(grid, radius);
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double d = distance_to(grid.coord(i), puncture, grid.dim());
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    if (!b.contains(best)) throw std::invalid_argument("DomainMask::punctured_ball: puncture is not an interior node");
    std::vector<char> f = b.flags();
    f[best] = 0;
    DomainMask out(grid, std::move(f));
    out.punctures_.push_back(best);
    return out;
}

DomainMask DomainMask::eroded(int layers) const
{
    if (layers <= 0) return DomainMask(grid_, flags_);
    const int n = grid_.dim();
    const int m = grid_.m();
    std::vector<char> f(flags_.size(), 0);
    for (std::size_t i : nodes_) {
        auto mi = grid_.multi_index(i);
        bool keep = true;
        std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int k = 0; k < n; ++k) {
            lo[k] = -layers;
            hi[k] = layers;
        }
        for (int a = lo[0]; a <= hi[0] && keep; ++a)
            for (int b = lo[1]; b <= hi[1] && keep; ++b)
                for (int c = lo[2]; c <= hi[2] && keep; ++c) {
                    std::array<int, 3> nb{mi[0] + a, mi[1] + b, mi[2] + c};
                    for (int k = 0; k < n; ++k)
                        if (nb[k] < 0 || nb[k] >= m) keep = false;
                    if (keep && !flags_[grid_.index(nb)]) keep = false;
                }
        f[i] = keep;
    }
    return DomainMask(grid_, std::move(f));
}

DomainMask DomainMask::with_exhaustion(const std::vector<int>& layers) const
{
    DomainMask out(grid_, flags_);
    out.punctures_ = punctures_;
    std::vector<int> sorted = layers;
    std::sort(sorted.begin(), sorted.end(), std::greater<int>());
    for (int k : sorted) {
        DomainMask level = eroded(k);
        if (level.count() == 0) continue;
        if (!out.levels_.empty() && level.flags_ == out.levels_.back().flags_) continue;
        out.levels_.push_back(std::move(level));
    }
    out.levels_.push_back(DomainMask(grid_, flags_));
    return out;
}

CertificateSample& CertificateReport::add(std::vector<double> point, double value, double bound_here, double error)
{
    CertificateSample s;
    s.point = std::move(point);
    s.value = value;
    s.bound = bound_here;
    s.error = error;
    double slack = relation == "<=" ? bound_here - value : value - bound_here;
    s.ok = std::isfinite(value) && slack >= margin && (error <= 0.0 || slack > 2.0 * error);
    samples.push_back(std::move(s));
    return samples.back();
}

void CertificateReport::fail(const std::string& clause)
{
    if (failing_clause.empty()) failing_clause = clause;
    else failing_clause += "; " + clause;
}

bool CertificateReport::finalize()
{
    bool ok = failing_clause.empty() && !samples.empty();
    for (const auto& s : samples) ok = ok && s.ok;
    if (samples.empty() && failing_clause.empty()) fail("no samples");
    verdict = ok;
    return verdict;
}

}  // namespace nonlocal
