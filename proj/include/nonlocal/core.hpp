#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nonlocal/profile.hpp"

namespace nonlocal {

// Φ_p(t) = |t|^{p-2} t
double phi_p(double t, double p);

class FracParams {
public:
    enum class SpBranch { below_one, one, above_one };

    FracParams(double s, double p, int n = 1);

    double s() const noexcept { return s_; }
    double p() const noexcept { return p_; }
    int n() const noexcept { return n_; }
    double sp() const noexcept { return sp_; }

    bool subcritical() const noexcept { return sp_ < n_; }
    bool supercritical() const noexcept { return sp_ > n_; }
    SpBranch sp_branch() const noexcept;

    FracParams with_dim(int n) const { return FracParams(s_, p_, n); }

private:
    double s_;
    double p_;
    int n_;
    double sp_;
};

class Grid {
public:
    Grid(int dim, double half_width, int nodes_per_axis);

    int dim() const noexcept { return dim_; }
    double half_width() const noexcept { return L_; }
    int m() const noexcept { return m_; }
    double spacing() const noexcept { return h_; }
    double cell_volume() const noexcept { return cell_volume_; }
    std::size_t size() const noexcept { return size_; }

    // exactly antisymmetric under k -> m - 1 - k
    double axis_coord(int k) const noexcept { return (2 * k - (m_ - 1)) * (L_ / (m_ - 1)); }
    Point coord(std::size_t index) const;
    std::array<int, 3> multi_index(std::size_t index) const;
    std::size_t index(const std::array<int, 3>& mi) const;
    bool on_box_boundary(std::size_t index) const;
    std::optional<std::size_t> node_at(const Point& x, double tol = 1e-9) const;

    bool operator==(const Grid& o) const noexcept
    {
        return dim_ == o.dim_ && L_ == o.L_ && m_ == o.m_;
    }

private:
    int dim_;
    double L_;
    int m_;
    double h_;
    double cell_volume_;
    std::size_t size_;
};

struct ConstantTail {
    double value = 0.0;
};

struct ProfileTail {
    Profile profile;
};

// base + amplitude (1 + |y|^2)^{-exponent/2}
struct PowerDecayTail {
    double base = 0.0;
    double amplitude = 0.0;
    double exponent = 1.0;
};

using TailModel = std::variant<ConstantTail, ProfileTail, PowerDecayTail>;

double tail_value(const TailModel& tail, const Point& y, int n);
double tail_growth(const TailModel& tail);
std::optional<double> tail_constant(const TailModel& tail);
std::string tail_tag(const TailModel& tail);
void check_tail_admissible(const TailModel& tail, const FracParams& params);

class GridFunction {
public:
    GridFunction(Grid grid, std::vector<double> values, TailModel tail);

    const Grid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const TailModel& tail() const noexcept { return tail_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }

    double evaluate(const Point& x) const;
    double sup_norm() const;

    GridFunction with_values(std::vector<double> values) const;
    GridFunction negated() const;

private:
    Grid grid_;
    std::vector<double> values_;
    TailModel tail_;
};

GridFunction constant_function(const Grid& grid, double c);
GridFunction pointwise_min(const GridFunction& u, const GridFunction& v);
GridFunction sample_profile(const Profile& profile, const Grid& grid);
GridFunction sample_profile(const std::string& tag, const std::map<std::string, double>& params,
                            const Grid& grid);

class DomainMask {
public:
    static DomainMask ball(const Grid& grid, double radius, const Point& center = {});
    static DomainMask box(const Grid& grid, double half_width);
    static DomainMask ring(const Grid& grid, double r_inner, double r_outer);
    static DomainMask punctured_ball(const Grid& grid, double radius, const Point& puncture = {});
    static DomainMask from_flags(const Grid& grid, std::vector<char> flags);

    const Grid& grid() const noexcept { return grid_; }
    bool contains(std::size_t i) const { return flags_[i] != 0; }
    const std::vector<char>& flags() const noexcept { return flags_; }
    const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
    std::size_t count() const noexcept { return nodes_.size(); }
    const std::vector<std::size_t>& punctures() const noexcept { return punctures_; }

    DomainMask eroded(int layers) const;
    // levels D_1 ⊂ D_2 ⊂ ... ⊂ Ω, the last one is Ω itself
    DomainMask with_exhaustion(const std::vector<int>& layers = {3, 2, 1}) const;
    const std::vector<DomainMask>& erosion_levels() const noexcept { return levels_; }

private:
    DomainMask(Grid grid, std::vector<char> flags);

    Grid grid_;
    std::vector<char> flags_;
    std::vector<std::size_t> nodes_;
    std::vector<std::size_t> punctures_;
    std::vector<DomainMask> levels_;
};

struct CertificateSample {
    std::vector<double> point;
    double value = 0.0;
    double bound = 0.0;
    double error = 0.0;
    bool ok = false;
};

// Samples are checked as value <= bound - margin (relation "<=") or value >= bound + margin.
struct CertificateReport {
    std::string subject;
    std::string relation = "<=";
    double bound = 0.0;
    double margin = 0.0;
    std::vector<CertificateSample> samples;
    std::map<std::string, double> tolerances;
    std::map<std::string, double> data;
    std::vector<std::string> notes;
    std::string failing_clause;
    bool verdict = false;

    CertificateSample& add(std::vector<double> point, double value, double bound_here, double error = 0.0);
    CertificateSample& add(std::vector<double> point, double value) { return add(std::move(point), value, bound); }
    void fail(const std::string& clause);
    bool finalize();
};

}  // namespace nonlocal
