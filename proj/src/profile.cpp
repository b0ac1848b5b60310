#include "nonlocal/profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nonlocal {

namespace {

using json = nlohmann::json;

struct TagEntry {
    ProfileFamily family;
    const char* tag;
};

constexpr TagEntry kTags[] = {
    {ProfileFamily::constant, "constant"},
    {ProfileFamily::power_positive_part, "power-positive-part"},
    {ProfileFamily::truncated_minorant, "truncated-minorant"},
    {ProfileFamily::half_space, "half-space"},
    {ProfileFamily::cone, "cone"},
    {ProfileFamily::ring, "ring"},
    {ProfileFamily::shell_1d, "shell-1d"},
    {ProfileFamily::indicator_ball, "indicator-ball"},
    {ProfileFamily::smooth_cutoff, "smooth-cutoff"},
    {ProfileFamily::smooth_step, "smooth-step"},
    {ProfileFamily::affine, "affine"},
    {ProfileFamily::concave_huber, "concave-huber"},
    {ProfileFamily::pointwise_min, "pointwise-min"},
};

double norm(const Point& x, int n)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += x[k] * x[k];
    return std::sqrt(s);
}

double dot(const Point& a, const Point& b, int n)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

double dist(const Point& a, const Point& b, int n)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

double pos_pow(double t, double beta) { return t > 0.0 ? std::pow(t, beta) : 0.0; }

// (z + h)_+^β - z^β for z > 0 without cancellation
double pow_increment(double z, double h, double beta)
{
    if (z + h <= 0.0) return -std::pow(z, beta);
    return std::pow(z, beta) * std::expm1(beta * std::log1p(h / z));
}

double smoothstep5_d1(double t)
{
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

double smoothstep5_d2(double t)
{
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 60.0 * t * (2.0 * t * t - 3.0 * t + 1.0);
}

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument("profile: " + what);
}

}  // namespace

double smoothstep5(double t)
{
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

std::string family_tag(ProfileFamily f)
{
    for (const auto& e : kTags)
        if (e.family == f) return e.tag;
    return "unknown";
}

ProfileFamily family_from_tag(const std::string& tag)
{
    if (tag == "indicator-unit-ball") return ProfileFamily::indicator_ball;
    if (tag == "one-dim-shell") return ProfileFamily::shell_1d;
    for (const auto& e : kTags)
        if (tag == e.tag) return e.family;
    throw std::invalid_argument("unknown profile tag '" + tag + "'");
}

Profile::Profile(ProfileFamily family, ProfileParams params) : family_(family), params_(params) {}

Profile Profile::make(ProfileFamily family, const ProfileParams& params)
{
    ProfileParams p = params;
    require(std::isfinite(p.amplitude), "amplitude must be finite");
    switch (family) {
    case ProfileFamily::constant:
        require(std::isfinite(p.value), "constant value must be finite");
        break;
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space:
    case ProfileFamily::affine: {
        if (family != ProfileFamily::affine) require(p.beta > 0.0, "beta must be positive");
        double nd = norm(p.direction, 3);
        require(nd > 0.0, "direction must be nonzero");
        for (double& d : p.direction) d /= nd;
        break;
    }
    case ProfileFamily::truncated_minorant:
        require(p.beta > 0.0 && p.beta < 1.0, "beta must lie in (0,1)");
        require(p.L > 0.0, "L must be positive");
        break;
    case ProfileFamily::cone:
        require(p.beta > 0.0, "beta must be positive");
        require(p.radius > 0.0, "radius must be positive");
        break;
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        require(p.beta > 0.0, "beta must be positive");
        require(p.r0 > 0.0, "r0 must be positive");
        break;
    case ProfileFamily::indicator_ball:
    case ProfileFamily::smooth_cutoff:
        require(p.radius > 0.0, "radius must be positive");
        break;
    case ProfileFamily::smooth_step:
        require(p.inner > 0.0 && p.outer > p.inner, "need 0 < inner < outer");
        break;
    case ProfileFamily::concave_huber:
        require(p.cap > 0.0, "cap must be positive");
        break;
    case ProfileFamily::pointwise_min:
        throw std::invalid_argument("profile: use Profile::minimum for pointwise-min");
    }
    return Profile(family, p);
}

Profile Profile::constant(double c)
{
    ProfileParams p;
    p.value = c;
    return make(ProfileFamily::constant, p);
}

Profile Profile::minimum(const Profile& a, const Profile& b)
{
    if (a == b) return a;
    if (a.family_ == ProfileFamily::constant && b.family_ == ProfileFamily::constant)
        return constant(std::min(a.params_.amplitude * a.params_.value, b.params_.amplitude * b.params_.value));
    Profile out(ProfileFamily::pointwise_min, ProfileParams{});
    out.left_ = std::make_shared<const Profile>(a);
    out.right_ = std::make_shared<const Profile>(b);
    return out;
}

Profile Profile::make(const std::string& tag, const std::map<std::string, double>& kv)
{
    ProfileFamily family = family_from_tag(tag);
    ProfileParams p;
    for (const auto& [key, v] : kv) {
        if (key == "beta") p.beta = v;
        else if (key == "r0") p.r0 = v;
        else if (key == "radius" || key == "R") p.radius = v;
        else if (key == "L") p.L = v;
        else if (key == "value" || key == "c") p.value = v;
        else if (key == "inner") p.inner = v;
        else if (key == "outer") p.outer = v;
        else if (key == "value_in") p.value_in = v;
        else if (key == "value_out") p.value_out = v;
        else if (key == "cap") p.cap = v;
        else if (key == "offset") p.offset = v;
        else if (key == "amplitude") p.amplitude = v;
        else if (key == "dx") p.direction[0] = v;
        else if (key == "dy") p.direction[1] = v;
        else if (key == "dz") p.direction[2] = v;
        else if (key == "cx") p.center[0] = v;
        else if (key == "cy") p.center[1] = v;
        else if (key == "cz") p.center[2] = v;
        else throw std::invalid_argument("profile '" + tag + "': unknown parameter '" + key + "'");
    }
    return make(family, p);
}

bool Profile::operator==(const Profile& o) const
{
    if (family_ != o.family_) return false;
    if (family_ == ProfileFamily::pointwise_min) return *left_ == *o.left_ && *right_ == *o.right_;
    const ProfileParams& a = params_;
    const ProfileParams& b = o.params_;
    return a.beta == b.beta && a.r0 == b.r0 && a.radius == b.radius && a.L == b.L && a.value == b.value &&
           a.inner == b.inner && a.outer == b.outer && a.value_in == b.value_in && a.value_out == b.value_out &&
           a.cap == b.cap && a.offset == b.offset && a.amplitude == b.amplitude && a.direction == b.direction &&
           a.center == b.center;
}

double Profile::value(const Point& x, int n) const
{
    const ProfileParams& p = params_;
    double v = 0.0;
    switch (family_) {
    case ProfileFamily::constant:
        v = p.value;
        break;
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space:
        v = pos_pow(dot(p.direction, x, n) - p.offset, p.beta);
        break;
    case ProfileFamily::truncated_minorant: {
        double t = dot(p.direction, x, n) - p.offset;
        v = t <= 0.0 ? 0.0 : (t < p.L ? std::pow(t, p.beta) : std::pow(p.L, p.beta));
        break;
    }
    case ProfileFamily::cone:
        v = pos_pow(1.0 - dist(x, p.center, n) / p.radius, p.beta);
        break;
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        v = pos_pow(dist(x, p.center, n) - p.r0, p.beta);
        break;
    case ProfileFamily::indicator_ball:
        v = dist(x, p.center, n) < p.radius ? 1.0 : 0.0;
        break;
    case ProfileFamily::smooth_cutoff:
        v = 1.0 - smoothstep5((dist(x, p.center, n) - p.radius) / p.radius);
        break;
    case ProfileFamily::smooth_step:
        v = p.value_in +
            (p.value_out - p.value_in) * smoothstep5((dist(x, p.center, n) - p.inner) / (p.outer - p.inner));
        break;
    case ProfileFamily::affine:
        v = dot(p.direction, x, n) + p.offset;
        break;
    case ProfileFamily::concave_huber: {
        double r = dist(x, p.center, n);
        v = r <= p.cap ? -0.5 * r * r : -p.cap * r + 0.5 * p.cap * p.cap;
        break;
    }
    case ProfileFamily::pointwise_min:
        return std::min(left_->value(x, n), right_->value(x, n));
    }
    return p.amplitude * v;
}

bool Profile::is_radial() const noexcept
{
    switch (family_) {
    case ProfileFamily::constant:
    case ProfileFamily::cone:
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
    case ProfileFamily::indicator_ball:
    case ProfileFamily::smooth_cutoff:
    case ProfileFamily::smooth_step:
    case ProfileFamily::concave_huber:
        return true;
    case ProfileFamily::pointwise_min:
        return left_->is_radial() && right_->is_radial() && left_->params_.center == right_->params_.center;
    default:
        return false;
    }
}

double Profile::growth_exponent() const noexcept
{
    switch (family_) {
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space:
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        return params_.beta;
    case ProfileFamily::affine:
    case ProfileFamily::concave_huber:
        return 1.0;
    case ProfileFamily::pointwise_min:
        return std::max(left_->growth_exponent(), right_->growth_exponent());
    default:
        return 0.0;
    }
}

std::optional<double> Profile::constant_beyond(double radius, int n) const
{
    const ProfileParams& p = params_;
    double c = norm(p.center, n);
    switch (family_) {
    case ProfileFamily::constant:
        return p.amplitude * p.value;
    case ProfileFamily::cone:
        if (radius >= c + p.radius) return 0.0;
        return std::nullopt;
    case ProfileFamily::indicator_ball:
        if (radius >= c + p.radius) return 0.0;
        return std::nullopt;
    case ProfileFamily::smooth_cutoff:
        if (radius >= c + 2.0 * p.radius) return 0.0;
        return std::nullopt;
    case ProfileFamily::smooth_step:
        if (radius >= c + p.outer) return p.amplitude * p.value_out;
        return std::nullopt;
    case ProfileFamily::pointwise_min: {
        auto a = left_->constant_beyond(radius, n);
        auto b = right_->constant_beyond(radius, n);
        if (a && b) return std::min(*a, *b);
        return std::nullopt;
    }
    default:
        return std::nullopt;
    }
}

bool Profile::has_line_form() const noexcept
{
    if (family_ == ProfileFamily::pointwise_min) return left_->has_line_form() && right_->has_line_form();
    return true;
}

double Profile::line_value(double y) const
{
    if (family_ == ProfileFamily::pointwise_min) return std::min(left_->line_value(y), right_->line_value(y));
    if (is_radial()) {
        Point x{std::abs(y), 0.0, 0.0};
        ProfileParams centered = params_;
        centered.center = {0.0, 0.0, 0.0};
        return Profile(family_, centered).value(x, 1);
    }
    Point x{y, 0.0, 0.0};
    ProfileParams along = params_;
    along.direction = {params_.direction[0] < 0.0 ? -1.0 : 1.0, 0.0, 0.0};
    return Profile(family_, along).value(x, 1);
}

double Profile::line_increment(double x, double h) const
{
    const ProfileParams& p = params_;
    const double A = p.amplitude;
    const double sx = sgn(x);
    const double y = x + h;
    switch (family_) {
    case ProfileFamily::constant:
        return 0.0;
    case ProfileFamily::affine:
        return A * sgn(p.direction[0]) * h;
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space: {
        double sd = sgn(p.direction[0]);
        double tx = sd * x - p.offset;
        double th = sd * h;
        if (tx > 0.0) return A * pow_increment(tx, th, p.beta);
        return A * pos_pow(tx + th, p.beta);
    }
    case ProfileFamily::truncated_minorant: {
        double sd = sgn(p.direction[0]);
        double tx = sd * x - p.offset;
        double ty = tx + sd * h;
        if (tx > 0.0 && tx < p.L) {
            if (ty <= 0.0) return -A * std::pow(tx, p.beta);
            if (ty < p.L) return A * pow_increment(tx, ty - tx, p.beta);
            return A * std::pow(tx, p.beta) * std::expm1(p.beta * std::log(p.L / tx));
        }
        break;
    }
    case ProfileFamily::cone: {
        double ax = std::abs(x);
        if (ax < p.radius && x != 0.0 && sgn(y) == sx && std::abs(y) < p.radius)
            return A * pow_increment(1.0 - ax / p.radius, -sx * h / p.radius, p.beta);
        break;
    }
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d: {
        double ax = std::abs(x);
        if (ax > p.r0 && sgn(y) == sx) return A * pow_increment(ax - p.r0, sx * h, p.beta);
        break;
    }
    default:
        break;
    }
    return line_value(y) - line_value(x);
}

double Profile::line_d1(double x) const
{
    const ProfileParams& p = params_;
    const double A = p.amplitude;
    const double sx = sgn(x);
    const double ax = std::abs(x);
    switch (family_) {
    case ProfileFamily::constant:
    case ProfileFamily::indicator_ball:
        return 0.0;
    case ProfileFamily::affine:
        return A * sgn(p.direction[0]);
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space: {
        double sd = sgn(p.direction[0]);
        double t = sd * x - p.offset;
        return t > 0.0 ? A * sd * p.beta * std::pow(t, p.beta - 1.0) : 0.0;
    }
    case ProfileFamily::truncated_minorant: {
        double sd = sgn(p.direction[0]);
        double t = sd * x - p.offset;
        return (t > 0.0 && t < p.L) ? A * sd * p.beta * std::pow(t, p.beta - 1.0) : 0.0;
    }
    case ProfileFamily::cone:
        return ax < p.radius ? -A * sx * p.beta * std::pow(1.0 - ax / p.radius, p.beta - 1.0) / p.radius : 0.0;
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        return ax > p.r0 ? A * sx * p.beta * std::pow(ax - p.r0, p.beta - 1.0) : 0.0;
    case ProfileFamily::smooth_cutoff:
        return -A * sx * smoothstep5_d1((ax - p.radius) / p.radius) / p.radius;
    case ProfileFamily::smooth_step:
        return A * sx * (p.value_out - p.value_in) * smoothstep5_d1((ax - p.inner) / (p.outer - p.inner)) /
               (p.outer - p.inner);
    case ProfileFamily::concave_huber:
        return ax <= p.cap ? -A * x : -A * p.cap * sx;
    case ProfileFamily::pointwise_min:
        break;
    }
    double step = 1e-5 * std::max(1.0, ax);
    return (line_increment(x, step) - line_increment(x, -step)) / (2.0 * step);
}

double Profile::line_d2(double x) const
{
    const ProfileParams& p = params_;
    const double A = p.amplitude;
    const double ax = std::abs(x);
    switch (family_) {
    case ProfileFamily::constant:
    case ProfileFamily::indicator_ball:
    case ProfileFamily::affine:
        return 0.0;
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space: {
        double t = sgn(p.direction[0]) * x - p.offset;
        return t > 0.0 ? A * p.beta * (p.beta - 1.0) * std::pow(t, p.beta - 2.0) : 0.0;
    }
    case ProfileFamily::truncated_minorant: {
        double t = sgn(p.direction[0]) * x - p.offset;
        return (t > 0.0 && t < p.L) ? A * p.beta * (p.beta - 1.0) * std::pow(t, p.beta - 2.0) : 0.0;
    }
    case ProfileFamily::cone:
        return ax < p.radius
                   ? A * p.beta * (p.beta - 1.0) * std::pow(1.0 - ax / p.radius, p.beta - 2.0) / (p.radius * p.radius)
                   : 0.0;
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        return ax > p.r0 ? A * p.beta * (p.beta - 1.0) * std::pow(ax - p.r0, p.beta - 2.0) : 0.0;
    case ProfileFamily::smooth_cutoff:
        return -A * smoothstep5_d2((ax - p.radius) / p.radius) / (p.radius * p.radius);
    case ProfileFamily::smooth_step: {
        double w = p.outer - p.inner;
        return A * (p.value_out - p.value_in) * smoothstep5_d2((ax - p.inner) / w) / (w * w);
    }
    case ProfileFamily::concave_huber:
        return ax <= p.cap ? -A : 0.0;
    case ProfileFamily::pointwise_min:
        break;
    }
    double step = 1e-4 * std::max(1.0, ax);
    return (line_increment(x, step) + line_increment(x, -step)) / (step * step);
}

std::vector<double> Profile::line_breaks(double x) const
{
    const ProfileParams& p = params_;
    std::vector<double> b;
    double sd = sgn(p.direction[0]);
    switch (family_) {
    case ProfileFamily::constant:
    case ProfileFamily::affine:
        break;
    case ProfileFamily::power_positive_part:
    case ProfileFamily::half_space:
        b = {sd * p.offset};
        break;
    case ProfileFamily::truncated_minorant:
        b = {sd * p.offset, sd * (p.offset + p.L)};
        break;
    case ProfileFamily::cone:
        b = {-p.radius, 0.0, p.radius};
        break;
    case ProfileFamily::ring:
    case ProfileFamily::shell_1d:
        b = {-p.r0, p.r0};
        break;
    case ProfileFamily::indicator_ball:
        b = {-p.radius, p.radius};
        break;
    case ProfileFamily::smooth_cutoff:
        b = {-2.0 * p.radius, -p.radius, p.radius, 2.0 * p.radius};
        break;
    case ProfileFamily::smooth_step:
        b = {-p.outer, -p.inner, p.inner, p.outer};
        break;
    case ProfileFamily::concave_huber:
        b = {-p.cap, p.cap};
        break;
    case ProfileFamily::pointwise_min: {
        b = left_->line_breaks(x);
        auto r = right_->line_breaks(x);
        b.insert(b.end(), r.begin(), r.end());
        break;
    }
    }
    if (is_radial() && x != 0.0 && family_ != ProfileFamily::constant) b.push_back(-x);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

json Profile::to_json() const
{
    json j;
    j["family"] = tag();
    if (family_ == ProfileFamily::pointwise_min) {
        j["left"] = left_->to_json();
        j["right"] = right_->to_json();
        return j;
    }
    const ProfileParams& p = params_;
    j["beta"] = p.beta;
    j["r0"] = p.r0;
    j["radius"] = p.radius;
    j["L"] = p.L;
    j["value"] = p.value;
    j["inner"] = p.inner;
    j["outer"] = p.outer;
    j["value_in"] = p.value_in;
    j["value_out"] = p.value_out;
    j["cap"] = p.cap;
    j["offset"] = p.offset;
    j["amplitude"] = p.amplitude;
    j["direction"] = p.direction;
    j["center"] = p.center;
    return j;
}

Profile Profile::from_json(const json& j)
{
    ProfileFamily family = family_from_tag(j.at("family").get<std::string>());
    if (family == ProfileFamily::pointwise_min)
        return minimum(from_json(j.at("left")), from_json(j.at("right")));
    ProfileParams p;
    p.beta = j.at("beta").get<double>();
    p.r0 = j.at("r0").get<double>();
    p.radius = j.at("radius").get<double>();
    p.L = j.at("L").get<double>();
    p.value = j.at("value").get<double>();
    p.inner = j.at("inner").get<double>();
    p.outer = j.at("outer").get<double>();
    p.value_in = j.at("value_in").get<double>();
    p.value_out = j.at("value_out").get<double>();
    p.cap = j.at("cap").get<double>();
    p.offset = j.at("offset").get<double>();
    p.amplitude = j.at("amplitude").get<double>();
    p.direction = j.at("direction").get<Point>();
    p.center = j.at("center").get<Point>();
    return Profile(family, p);
}

}  // namespace nonlocal
