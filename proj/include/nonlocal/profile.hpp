#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace nonlocal {

using Point = std::array<double, 3>;

enum class ProfileFamily {
    constant,
    power_positive_part,  // (d·x - offset)_+^β, 1D form (x_+)^β
    truncated_minorant,   // ℓ(x_1) with cap at L, exponent β (= s in the minorant)
    half_space,           // (d·x - offset)_+^β with unit normal d
    cone,                 // (1 - |x - c|/radius)_+^β
    ring,                 // (|x - c| - r0)_+^β
    shell_1d,             // (|x| - r0)_+^β in one variable
    indicator_ball,       // 1 on |x - c| < radius
    smooth_cutoff,        // 1 on B_R, quintic ramp, 0 outside B_2R
    smooth_step,          // value_in on B_inner, quintic ramp, value_out outside B_outer
    affine,               // d·x + offset
    concave_huber,        // -|x|^2/2 on |x| <= cap, tangent cone outside
    pointwise_min,
};

struct ProfileParams {
    double beta = 0.5;
    double r0 = 1.0;
    double radius = 1.0;
    double L = 1.0;
    double value = 0.0;
    double inner = 2.0;
    double outer = 4.0;
    double value_in = 0.0;
    double value_out = 1.0;
    double cap = 1.0;
    double offset = 0.0;
    double amplitude = 1.0;
    Point direction{1.0, 0.0, 0.0};
    Point center{0.0, 0.0, 0.0};
};

std::string family_tag(ProfileFamily f);
ProfileFamily family_from_tag(const std::string& tag);

// quintic smoothstep on [0,1]
double smoothstep5(double t);

class Profile {
public:
    static Profile make(ProfileFamily family, const ProfileParams& params);
    static Profile make(const std::string& tag, const std::map<std::string, double>& kv);
    static Profile constant(double c);
    static Profile minimum(const Profile& a, const Profile& b);

    ProfileFamily family() const noexcept { return family_; }
    const ProfileParams& params() const noexcept { return params_; }
    std::string tag() const { return family_tag(family_); }

    double value(const Point& x, int n) const;

    bool is_radial() const noexcept;
    // growth exponent γ with |u(x)| <= C(1 + |x|)^γ
    double growth_exponent() const noexcept;
    // value on {|x - 0| >= radius} when the profile is constant there
    std::optional<double> constant_beyond(double radius, int n) const;

    // one-variable form along the first axis (radial families: as a function of the signed radius)
    bool has_line_form() const noexcept;
    double line_value(double y) const;
    // f(x + h) - f(x), accurate for small |h| on power-type pieces
    double line_increment(double x, double h) const;
    double line_d1(double x) const;
    double line_d2(double x) const;
    // points where f is not smooth or where f(y) = f(x) away from y = x
    std::vector<double> line_breaks(double x) const;

    nlohmann::json to_json() const;
    static Profile from_json(const nlohmann::json& j);

    bool operator==(const Profile& o) const;

private:
    Profile(ProfileFamily family, ProfileParams params);

    ProfileFamily family_;
    ProfileParams params_;
    std::shared_ptr<const Profile> left_;
    std::shared_ptr<const Profile> right_;
};

}  // namespace nonlocal
