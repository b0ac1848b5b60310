#include "nonlocal/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "nonlocal/barriers.hpp"
#include "nonlocal/io.hpp"
#include "nonlocal/perron.hpp"
#include "nonlocal/probes.hpp"

namespace nonlocal::cli {

using json = nlohmann::json;

namespace {

enum class Kind { number, integer, list, word, descriptor };

const std::map<std::string, Kind>& known_keys()
{
    static const std::map<std::string, Kind> keys = {
        {"s", Kind::number},
        {"p", Kind::number},
        {"n", Kind::integer},
        {"L", Kind::number},
        {"m", Kind::integer},
        {"domain", Kind::word},
        {"domain.radius", Kind::number},
        {"domain.inner", Kind::number},
        {"domain.outer", Kind::number},
        {"domain.cx", Kind::number},
        {"domain.cy", Kind::number},
        {"domain.cz", Kind::number},
        {"f", Kind::descriptor},
        {"g", Kind::descriptor},
        {"u", Kind::descriptor},
        {"gamma", Kind::descriptor},
        {"obstacle", Kind::word},
        {"tolerance", Kind::number},
        {"max_iterations", Kind::integer},
        {"memory", Kind::integer},
        {"quad", Kind::word},
        {"output", Kind::word},
        {"ms", Kind::list},
        {"max_sweeps", Kind::integer},
        {"sweep_tolerance", Kind::number},
        {"layers", Kind::list},
        {"experiment", Kind::word},
        {"configuration", Kind::word},
        {"s_list", Kind::list},
        {"xi0", Kind::list},
        {"x0", Kind::list},
        {"points", Kind::list},
        {"method", Kind::word},
        {"family", Kind::word},
        {"beta", Kind::number},
        {"r0", Kind::number},
        {"R", Kind::number},
        {"normal", Kind::list},
        {"name", Kind::word},
        {"ring.inner", Kind::number},
        {"ring.outer", Kind::number},
    };
    return keys;
}

const std::set<std::string> profile_prefixes = {"f", "g", "u", "gamma"};
const std::set<std::string> profile_keys = {"beta",  "r0",    "radius",    "R",         "L",   "value", "c",
                                            "inner", "outer", "value_in",  "value_out", "cap", "offset",
                                            "amplitude", "dx", "dy", "dz", "cx", "cy", "cz"};

const std::map<std::string, std::set<std::string>> allowed_words = {
    {"domain", {"ball", "box", "ring", "punctured-interval"}},
    {"quad", {"coarse", "standard", "fine"}},
    {"obstacle", {"none", "above", "below"}},
    {"experiment", {"puncture", "rhs-independence", "exterior", "barrier"}},
    {"configuration", {"puncture", "exterior-sphere"}},
    {"method", {"grid", "profile"}},
    {"name", {"C", "N", "c_p", "ring_delta", "cutoff_margin"}},
};

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out)
{
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

Kind kind_of(const std::string& key)
{
    auto it = known_keys().find(key);
    if (it != known_keys().end()) return it->second;
    const auto dot = key.find('.');
    if (dot != std::string::npos && profile_prefixes.count(key.substr(0, dot)) && profile_keys.count(key.substr(dot + 1)))
        return Kind::number;
    throw ConfigError("unknown key '" + key + "'");
}

std::string normalize(const std::string& key, const std::string& raw)
{
    const std::string v = trim(raw);
    if (v.empty()) throw ConfigError("key '" + key + "': empty value");
    double d = 0.0;
    switch (kind_of(key)) {
    case Kind::number:
        if (!parse_double(v, d)) throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
        return format_double(d);
    case Kind::integer: {
        if (!parse_double(v, d) || d != std::floor(d) || std::abs(d) > 1e9)
            throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
        return std::to_string(static_cast<long>(d));
    }
    case Kind::list: {
        std::stringstream ss(v);
        std::string item, out;
        while (std::getline(ss, item, ',')) {
            if (!parse_double(trim(item), d))
                throw ConfigError("key '" + key + "': expected a comma-separated list of numbers, got '" + v + "'");
            out += (out.empty() ? "" : ", ") + format_double(d);
        }
        return out;
    }
    case Kind::word: {
        auto it = allowed_words.find(key);
        if (it != allowed_words.end() && !it->second.count(v))
            throw ConfigError("key '" + key + "': unknown value '" + v + "'");
        if (key == "family") {
            try {
                barrier_from_tag(v);
            } catch (const std::exception&) {
                throw ConfigError("key 'family': unknown barrier family '" + v + "'");
            }
        }
        return v;
    }
    case Kind::descriptor:
        if (parse_double(v, d)) return format_double(d);
        if (key == "gamma" && v == "ring") return v;
        try {
            family_from_tag(v);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected a number or a profile tag, got '" + v + "'");
        }
        return v;
    }
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::parse(const std::string& text)
{
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (cfg.has(key)) throw ConfigError("key '" + key + "' given twice");
        cfg.set(key, line.substr(eq + 1));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) { entries_[key] = normalize(key, value); }

std::string RunConfig::text(const std::string& key, const std::string& fallback) const
{
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double RunConfig::number(const std::string& key, double fallback) const
{
    return has(key) ? number(key) : fallback;
}

double RunConfig::number(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
    double d = 0.0;
    if (!parse_double(it->second, d)) throw ConfigError("key '" + key + "': expected a number");
    return d;
}

int RunConfig::integer(const std::string& key, int fallback) const
{
    return has(key) ? static_cast<int>(number(key)) : fallback;
}

std::vector<double> RunConfig::numbers(const std::string& key, std::vector<double> fallback) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double d = 0.0;
        if (!parse_double(trim(item), d)) throw ConfigError("key '" + key + "': expected numbers");
        out.push_back(d);
    }
    return out;
}

std::map<std::string, double> RunConfig::group(const std::string& prefix) const
{
    std::map<std::string, double> out;
    const std::string head = prefix + ".";
    for (const auto& [k, v] : entries_)
        if (k.rfind(head, 0) == 0) out[k.substr(head.size())] = number(k);
    return out;
}

std::string RunConfig::canonical() const
{
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

// ---------------------------------------------------------------------------------------------
// building blocks

namespace {

struct Outcome {
    bool pass = true;
    bool converged = true;
};

struct Context {
    RunConfig cfg;
    std::string subcommand;
    std::filesystem::path out;
    std::ofstream log;

    void note(const std::string& line) { log << line << '\n'; }
    std::string path(const std::string& file) const { return (out / file).string(); }
};

FracParams params_of(const RunConfig& c) { return FracParams(c.number("s"), c.number("p"), c.integer("n", 1)); }

Grid grid_of(const RunConfig& c) { return Grid(c.integer("n", 1), c.number("L", 2.0), c.integer("m", 129)); }

QuadratureSpec quad_of(const RunConfig& c) { return quadrature_preset(c.text("quad", "standard")); }

Point center_of(const RunConfig& c)
{
    return {c.number("domain.cx", 0.0), c.number("domain.cy", 0.0), c.number("domain.cz", 0.0)};
}

DomainMask domain_of(const RunConfig& c, const Grid& g)
{
    const std::string kind = c.text("domain", "ball");
    if (kind == "ball") return DomainMask::ball(g, c.number("domain.radius", 1.0), center_of(c));
    if (kind == "box") return DomainMask::box(g, c.number("domain.radius", 1.0));
    if (kind == "ring") return DomainMask::ring(g, c.number("domain.inner", 0.5), c.number("domain.outer", 1.0));
    return DomainMask::punctured_ball(g, c.number("domain.radius", 1.0), center_of(c));
}

GridFunction function_of(const RunConfig& c, const std::string& key, const Grid& g, double fallback)
{
    const std::string v = c.text(key, format_double(fallback));
    double d = 0.0;
    if (parse_double(v, d)) return constant_function(g, d);
    try {
        return sample_profile(v, c.group(key), g);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

GridFunction data_of(const RunConfig& c, const Grid& g) { return function_of(c, "g", g, 0.0); }

SolverConfig solver_of(const RunConfig& c)
{
    SolverConfig s;
    if (c.has("tolerance")) s.tolerance = c.number("tolerance");
    s.max_iterations = c.integer("max_iterations", s.max_iterations);
    s.memory = c.integer("memory", s.memory);
    s.quad = quad_of(c);
    return s;
}

std::vector<int> ladder_of(const RunConfig& c, std::vector<int> fallback)
{
    if (!c.has("ms")) return fallback;
    std::vector<int> out;
    for (double d : c.numbers("ms", {})) {
        if (d < 3 || d != std::floor(d)) throw ConfigError("key 'ms': node counts must be integers >= 3");
        out.push_back(static_cast<int>(d));
    }
    return out;
}

Point point_of(const std::vector<double>& v, int n, const std::string& key)
{
    if (static_cast<int>(v.size()) != n) throw ConfigError("key '" + key + "': expected " + std::to_string(n) + " coordinates");
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) x[k] = v[k];
    return x;
}

json config_json(const RunConfig& c)
{
    json j = json::object();
    for (const auto& [k, v] : c.entries()) j[k] = v;
    return j;
}

json header(const Context& ctx, const std::string& schema)
{
    return json{{"schema", schema}, {"subcommand", ctx.subcommand}, {"config", config_json(ctx.cfg)}};
}

json solve_json(const SolveReport& r)
{
    return json{{"iterations", r.iterations}, {"energy", r.energy},       {"gradient_sup", r.gradient_sup},
                {"residual_l2", r.residual_l2}, {"tolerance", r.tolerance}, {"converged", r.converged},
                {"status", r.status},         {"energy_history", r.energy_history}};
}

json level_log_json(const std::vector<LevelLog>& log)
{
    json a = json::array();
    for (const auto& l : log)
        a.push_back({{"sweep", l.sweep}, {"level", l.level}, {"nodes", l.nodes}, {"iterations", l.iterations},
                     {"wrong_way", l.wrong_way}, {"change", l.change}});
    return a;
}

json regularity_json(const RegularityReport& r, int n)
{
    json levels = json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"m", l.m},
                          {"h", l.h},
                          {"probe", std::vector<double>(l.probe.begin(), l.probe.begin() + n)},
                          {"distance", l.distance},
                          {"u", l.u},
                          {"discrepancy", l.discrepancy},
                          {"reference_u", l.reference_u},
                          {"field_discrepancy", l.field_discrepancy},
                          {"jump", l.jump},
                          {"iterations", l.iterations}});
    return json{{"label", r.label},
                {"xi0", std::vector<double>(r.xi0.begin(), r.xi0.begin() + n)},
                {"target", r.target},
                {"verdict", verdict_tag(r.verdict)},
                {"attaining_trend", r.attaining_trend},
                {"ignoring_trend", r.ignoring_trend},
                {"converged", r.converged},
                {"levels", levels}};
}

void write_ladder_csv(const std::vector<RegularityReport>& reps, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "label,level,m,h,distance,u,discrepancy,reference_u,field_discrepancy,jump\n";
    for (const auto& r : reps)
        for (std::size_t k = 0; k < r.levels.size(); ++k) {
            const auto& l = r.levels[k];
            out << r.label << ',' << k << ',' << l.m << ',' << format_double(l.h) << ',' << format_double(l.distance)
                << ',' << format_double(l.u) << ',' << format_double(l.discrepancy) << ','
                << format_double(l.reference_u) << ',' << format_double(l.field_discrepancy) << ','
                << format_double(l.jump) << '\n';
        }
}

RegularityProblem problem_of(const RunConfig& c)
{
    RegularityProblem pb = c.text("configuration", "puncture") == "puncture" ? puncture_problem(0.0)
                                                                               : exterior_sphere_problem(0.0);
    const double fv = c.number("f", 0.0);
    pb.f = [fv](const Grid& g) { return constant_function(g, fv); };
    return pb;
}

// ---------------------------------------------------------------------------------------------
// subcommands

Outcome cmd_eval(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const FracParams fp = params_of(c);
    const QuadratureSpec quad = quad_of(c);
    const int n = fp.n();
    json points = json::array();
    std::ofstream csv(ctx.path("eval.csv"));
    csv << "point,value,error\n";
    auto emit = [&](const Point& x, double value, double error) {
        std::vector<double> xv(x.begin(), x.begin() + n);
        points.push_back({{"x", xv}, {"value", value}, {"error", error}});
        for (std::size_t k = 0; k < xv.size(); ++k) csv << (k ? " " : "") << format_double(xv[k]);
        csv << ',' << format_double(value) << ',' << format_double(error) << '\n';
    };
    if (c.text("method", "grid") == "profile") {
        const std::string tag = c.text("u", "");
        double d = 0.0;
        if (tag.empty() || parse_double(tag, d)) throw ConfigError("key 'u': method = profile needs a profile tag");
        if (n == 2) throw ConfigError("key 'n': method = profile supports n = 1 and n = 3");
        Profile prof = Profile::make(tag, c.group("u"));
        std::vector<double> xs = c.numbers("points", {0.25, 0.5, 1.0, 2.0});
        for (double r : xs) {
            auto e = n == 1 ? eval_profile_1d_estimate(prof, r, fp, quad) : radial_reduce_3d_estimate(prof, r, fp, quad);
            emit({r, 0.0, 0.0}, e.value, e.error);
        }
    } else {
        const Grid g = grid_of(c);
        const GridFunction u = function_of(c, "u", g, 0.0);
        std::vector<std::size_t> nodes;
        if (c.has("points")) {
            std::vector<double> xs = c.numbers("points", {});
            if (xs.size() % n) throw ConfigError("key 'points': coordinate count is not a multiple of n");
            for (std::size_t k = 0; k < xs.size(); k += n) {
                Point x = point_of(std::vector<double>(xs.begin() + k, xs.begin() + k + n), n, "points");
                auto node = g.node_at(x);
                if (!node) throw ConfigError("key 'points': point is not a grid node");
                nodes.push_back(*node);
            }
        } else {
            nodes = domain_of(c, g).nodes();
        }
        for (std::size_t i : nodes) {
            PvEvaluation e = eval_pv_detailed(u, i, fp, quad);
            emit(g.coord(i), e.value, e.error_estimate);
        }
    }
    json j = header(ctx, "eval");
    j["params"] = to_json(fp);
    j["quad"] = quad.name;
    j["points"] = points;
    write_json(j, ctx.path("eval.json"));
    return {};
}

Outcome cmd_barrier(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    if (!c.has("family")) throw ConfigError("missing key 'family'");
    const FracParams fp = params_of(c);
    Point normal{1.0, 0.0, 0.0};
    if (c.has("normal")) normal = point_of(c.numbers("normal", {}), fp.n(), "normal");
    BarrierSpec spec;
    try {
        spec = BarrierSpec::make(barrier_from_tag(c.text("family", "")), fp, c.number("beta", 0.25), c.number("r0", 1.0),
                                 c.number("R", 1.0), c.number("L", 1.0), normal);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    CertificateReport rep = certify_barrier(spec, quad_of(c));
    json j = header(ctx, "certificate");
    j["report"] = to_json(rep);
    write_json(j, ctx.path("certificate.json"));
    write_certificate_csv(rep, ctx.path("certificate.csv"));
    ctx.note("barrier-check " + barrier_tag(spec.family) + ": " + (rep.verdict ? "pass" : "fail " + rep.failing_clause));
    return {rep.verdict, true};
}

Outcome cmd_solve(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const FracParams fp = params_of(c);
    const Grid g = grid_of(c);
    const DomainMask om = domain_of(c, g);
    const GridFunction data = data_of(c, g);
    const GridFunction f = function_of(c, "f", g, 0.0);
    const std::string obstacle = c.text("obstacle", "none");
    SolveResult r = obstacle == "none"
                        ? solve_dirichlet(f, data, om, fp, solver_of(c))
                        : solve_obstacle(data, f, om, fp, obstacle == "above" ? ObstacleSide::above : ObstacleSide::below,
                                         solver_of(c));
    write_grid_function(r.u, ctx.path("solution.csv"));
    json j = header(ctx, "solve-report");
    j["params"] = to_json(fp);
    j["grid"] = to_json(g);
    j["report"] = solve_json(r.report);
    j["solution_csv"] = "solution.csv";
    write_json(j, ctx.path("solve_report.json"));
    ctx.note("solve: " + r.report.status + " after " + std::to_string(r.report.iterations) + " iterations, wall " +
             format_double(r.report.wall_time) + " s");
    return {true, r.report.converged};
}

Outcome cmd_perron(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const FracParams fp = params_of(c);
    PerronConfig pc;
    pc.solver = solver_of(c);
    pc.max_sweeps = c.integer("max_sweeps", pc.max_sweeps);
    if (c.has("sweep_tolerance")) pc.sweep_tolerance = c.number("sweep_tolerance");
    if (c.has("layers")) {
        pc.layers.clear();
        for (double d : c.numbers("layers", {})) pc.layers.push_back(static_cast<int>(d));
    }
    PerronProblem pb;
    pb.g = [c](const Grid& g) { return data_of(c, g); };
    pb.f = [c](const Grid& g) { return function_of(c, "f", g, 0.0); };
    pb.omega = [c](const Grid& g) { return domain_of(c, g); };
    const std::vector<int> ms = ladder_of(c, {c.integer("m", 129)});
    PerronReport rep = resolutivity_study(pb, c.integer("n", 1), c.number("L", 2.0), ms, fp, pc);

    write_grid_function(rep.upper, ctx.path("upper.csv"));
    write_grid_function(rep.lower, ctx.path("lower.csv"));
    write_grid_function(rep.direct, ctx.path("direct.csv"));
    json rows = json::array();
    for (const auto& r : rep.refinement)
        rows.push_back({{"m", r.m}, {"h", r.h}, {"gap", r.gap}, {"direct_difference", r.direct_difference}});
    json j = header(ctx, "perron-report");
    j["params"] = to_json(fp);
    j["grid"] = to_json(rep.upper.grid());
    j["gap"] = rep.gap;
    j["direct_difference"] = rep.direct_difference;
    j["ordering_slack"] = rep.ordering_slack;
    j["tolerance"] = rep.tolerance;
    j["converged"] = rep.converged;
    j["gap_decreasing"] = rep.gap_decreasing;
    j["refinement"] = rows;
    j["upper_log"] = level_log_json(rep.upper_log);
    j["lower_log"] = level_log_json(rep.lower_log);
    j["upper_csv"] = "upper.csv";
    j["lower_csv"] = "lower.csv";
    j["direct_csv"] = "direct.csv";
    write_json(j, ctx.path("perron_report.json"));
    const bool ordered = rep.ordering_slack >= -rep.tolerance;
    ctx.note("perron: gap " + format_double(rep.gap) + (ordered ? ", ordered" : ", ORDER VIOLATED"));
    return {ordered, rep.converged};
}

Outcome cmd_probe(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const std::string experiment = c.text("experiment", "");
    if (experiment.empty()) throw ConfigError("missing key 'experiment'");
    const SolverConfig sc = solver_of(c);
    const std::vector<int> ms = ladder_of(c, default_ladder);

    if (experiment == "puncture") {
        std::vector<FracParams> list;
        for (double s : c.has("s_list") ? c.numbers("s_list", {}) : std::vector<double>{c.number("s")}) list.emplace_back(s, c.number("p"), 1);
        auto reps = puncture_experiment(list, ms, sc);
        json arr = json::array();
        bool conv = true;
        for (const auto& r : reps) {
            arr.push_back(regularity_json(r, 1));
            conv = conv && r.converged;
            ctx.note(r.label + ": " + verdict_tag(r.verdict));
        }
        json j = header(ctx, "regularity-report");
        j["experiment"] = experiment;
        j["reports"] = arr;
        write_json(j, ctx.path("regularity_report.json"));
        write_ladder_csv(reps, ctx.path("ladder.csv"));
        return {true, conv};
    }
    if (experiment == "rhs-independence") {
        auto r = rhs_independence_experiment(problem_of(c), FracParams(c.number("s"), c.number("p"), 1), ms, sc);
        json arr = json::array();
        bool conv = true;
        for (const auto& rep : r.reports) {
            arr.push_back(regularity_json(rep, 1));
            conv = conv && rep.converged;
        }
        json j = header(ctx, "regularity-report");
        j["experiment"] = experiment;
        j["reports"] = arr;
        j["agree"] = r.agree;
        j["ordered"] = r.ordered;
        j["ordering_slack"] = r.ordering_slack;
        write_json(j, ctx.path("regularity_report.json"));
        write_ladder_csv({r.reports.begin(), r.reports.end()}, ctx.path("ladder.csv"));
        ctx.note(std::string("rhs-independence: verdicts ") + (r.agree ? "agree" : "DISAGREE"));
        return {r.agree && r.ordered, conv};
    }
    CertificateReport rep;
    if (experiment == "exterior") {
        const Point x0 = point_of(c.numbers("x0", {1.5}), 1, "x0");
        rep = exterior_value_check(x0, problem_of(c), FracParams(c.number("s"), c.number("p"), 1), ms, sc);
    } else {
        const FracParams fp = params_of(c);
        const Grid g = grid_of(c);
        const DomainMask om = domain_of(c, g);
        const Point xi0 = point_of(c.numbers("xi0", std::vector<double>(fp.n(), 0.0)), fp.n(), "xi0");
        GridFunction gamma = constant_function(g, 0.0);
        if (c.text("gamma", "ring") == "ring") {
            // exterior ball of radius ring.inner tangent at ξ0, outward from the domain center
            const Point ctr = center_of(c);
            double norm = 0.0;
            for (int k = 0; k < fp.n(); ++k) norm += (xi0[k] - ctr[k]) * (xi0[k] - ctr[k]);
            norm = std::sqrt(norm);
            if (!(norm > 0.0)) throw ConfigError("key 'xi0': must differ from the domain center");
            const double r = c.number("ring.inner", 0.25);
            Point y0 = xi0;
            for (int k = 0; k < fp.n(); ++k) y0[k] += r * (xi0[k] - ctr[k]) / norm;
            gamma = ring_barrier(g, y0, r, c.number("ring.outer", 2.5), fp, sc);
        } else {
            gamma = function_of(c, "gamma", g, 0.0);
        }
        rep = barrier_certificate_at(xi0, gamma, om, fp, quad_of(c));
    }
    json j = header(ctx, "certificate");
    j["experiment"] = experiment;
    j["report"] = to_json(rep);
    write_json(j, ctx.path("certificate.json"));
    write_certificate_csv(rep, ctx.path("certificate.csv"));
    ctx.note(experiment + ": " + (rep.verdict ? "pass" : "fail " + rep.failing_clause));
    return {rep.verdict, true};
}

Outcome cmd_constants(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const std::string name = c.text("name", "");
    if (name.empty()) throw ConfigError("missing key 'name'");
    ConstantTable table;
    json j = header(ctx, "constant");
    j["name"] = name;
    double value = 0.0, error = 0.0;
    std::map<std::string, double> args;
    try {
        if (name == "C") {
            const double beta = c.number("beta"), s = c.number("s"), p = c.number("p");
            args = {{"beta", beta}, {"s", s}, {"p", p}};
            value = power_constant(beta, s, p, &table);
            error = power_constant_estimate(beta, s, p).error;
        } else if (name == "N") {
            const FracParams fp = params_of(c);
            args = {{"n", static_cast<double>(fp.n())}, {"sp", fp.sp()}};
            value = dead_variable_constant(fp, quad_of(c), &table);
        } else if (name == "c_p") {
            args = {{"p", c.number("p")}};
            value = lemma_simple_check(c.number("p")).data.at("c_p");
        } else if (name == "ring_delta") {
            const double beta = c.number("beta"), s = c.number("s"), p = c.number("p"), r0 = c.number("r0", 1.0);
            args = {{"beta", beta}, {"s", s}, {"p", p}, {"r0", r0}};
            RingDelta d = find_ring_delta(beta, s, p, r0, &table);
            value = d.delta;
            j["report"] = to_json(d.report);
        } else {
            const FracParams fp = params_of(c);
            const double R = c.number("R", 1.0);
            args = {{"n", static_cast<double>(fp.n())}, {"sp", fp.sp()}, {"R", R}};
            CutoffMargin m = cutoff_supersolution_margin(R, fp);
            value = m.margin;
            error = m.error;
            j["certified_bound"] = m.certified_bound;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
    }
    j["params"] = args;
    j["value"] = value;
    j["error"] = error;
    j["quad"] = quad_of(c).name;
    j["table"] = table.to_json();
    write_json(j, ctx.path("constant.json"));
    std::cout << j.dump(2) << '\n';
    return {};
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// entry point

int run(const std::vector<std::string>& args)
{
    CLI::App app{"Nonlocal p-Laplacian barriers, solvers and regularity probes"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string quad, out;
    int threads = 0;
    app.add_option("--quad", quad, "quadrature preset: coarse, standard, fine");
    app.add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory (NONLOCAL_OUT overrides)");

    struct Sub {
        CLI::App* app;
        std::string config;
        std::vector<std::string> sets;
        std::map<std::string, std::string> flags;
    };
    std::map<std::string, Sub> subs;
    auto add = [&](const std::string& name, const std::string& help, std::vector<std::string> flag_keys) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, help);
        s.app->add_option("--config", s.config, "flat key = value configuration file");
        s.app->add_option("--set", s.sets, "extra key=value entries");
        for (const std::string& k : flag_keys) s.app->add_option("--" + k, s.flags[k], "config key " + k);
    };
    add("eval", "evaluate the operator on a grid function or profile", {"s", "p", "n", "u", "m", "L", "method"});
    add("barrier-check", "sign certificate of an explicit barrier",
        {"family", "beta", "s", "p", "n", "r0", "R", "L", "normal"});
    add("solve", "variational Dirichlet or obstacle solve", {"s", "p", "n", "m", "L", "f", "g"});
    add("perron", "upper and lower Perron envelopes and their gap", {"s", "p", "n", "m", "L", "f", "g", "ms"});
    add("probe", "boundary regularity experiments", {"experiment", "s", "p", "ms", "s_list", "configuration"});
    add("constants", "named constants", {"name", "beta", "s", "p", "n", "r0", "R"});

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    Context ctx;
    try {
        const Sub* chosen = nullptr;
        for (auto& [name, s] : subs)
            if (s.app->parsed()) {
                ctx.subcommand = name;
                chosen = &s;
            }
        ctx.cfg = chosen->config.empty() ? RunConfig{} : RunConfig::load(chosen->config);
        for (const auto& [k, v] : chosen->flags)
            if (!v.empty()) ctx.cfg.set(k, v);
        for (const std::string& kv : chosen->sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            ctx.cfg.set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
        }
        if (!quad.empty()) ctx.cfg.set("quad", quad);
        quadrature_preset(ctx.cfg.text("quad", "standard"));
#ifdef _OPENMP
        if (threads > 0) omp_set_num_threads(threads);
#endif
        std::string dir = ctx.cfg.text("output", out.empty() ? "nonlocal_out" : out);
        if (!out.empty()) dir = out;
        if (const char* env = std::getenv("NONLOCAL_OUT"); env && *env) dir = env;
        ctx.out = dir;
        std::filesystem::create_directories(ctx.out);
        ctx.log.open(ctx.path("run.log"), std::ios::app);
        ctx.note("== " + ctx.subcommand);
        ctx.note(ctx.cfg.canonical());

        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        if (ctx.subcommand == "eval") o = cmd_eval(ctx);
        else if (ctx.subcommand == "barrier-check") o = cmd_barrier(ctx);
        else if (ctx.subcommand == "solve") o = cmd_solve(ctx);
        else if (ctx.subcommand == "perron") o = cmd_perron(ctx);
        else if (ctx.subcommand == "probe") o = cmd_probe(ctx);
        else o = cmd_constants(ctx);
        ctx.note("wall " + format_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) +
                 " s");
        if (!o.converged) return not_converged;
        return o.pass ? ok : certificate_failed;
    } catch (const SolverFailure& e) {
        std::cerr << "solver: " << e.what() << '\n';
        return not_converged;
    } catch (const ConfigError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return config_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << '\n';
        return config_error;
    } catch (const std::domain_error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return config_error;
    } catch (const std::logic_error& e) {
        std::cerr << "check failed: " << e.what() << '\n';
        return certificate_failed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    }
}

int run(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace nonlocal::cli
