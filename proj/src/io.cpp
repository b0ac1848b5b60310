#include "nonlocal/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nonlocal {

using json = nlohmann::json;

json to_json(const Grid& grid)
{
    return json{{"dim", grid.dim()}, {"half_width", grid.half_width()}, {"m", grid.m()}, {"spacing", grid.spacing()}};
}

Grid grid_from_json(const json& j)
{
    return Grid(j.at("dim").get<int>(), j.at("half_width").get<double>(), j.at("m").get<int>());
}

json to_json(const TailModel& tail)
{
    if (auto c = std::get_if<ConstantTail>(&tail)) return json{{"kind", "constant"}, {"value", c->value}};
    if (auto pt = std::get_if<ProfileTail>(&tail)) return json{{"kind", "profile"}, {"profile", pt->profile.to_json()}};
    const auto& pd = std::get<PowerDecayTail>(tail);
    return json{{"kind", "power-decay"}, {"base", pd.base}, {"amplitude", pd.amplitude}, {"exponent", pd.exponent}};
}

TailModel tail_from_json(const json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return ConstantTail{j.at("value").get<double>()};
    if (kind == "profile") return ProfileTail{Profile::from_json(j.at("profile"))};
    if (kind == "power-decay")
        return PowerDecayTail{j.at("base").get<double>(), j.at("amplitude").get<double>(), j.at("exponent").get<double>()};
    throw std::invalid_argument("unknown tail kind '" + kind + "'");
}

json to_json(const FracParams& params)
{
    return json{{"s", params.s()}, {"p", params.p()}, {"n", params.n()}, {"sp", params.sp()}};
}

json to_json(const CertificateReport& r)
{
    json samples = json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"point", s.point}, {"value", s.value}, {"bound", s.bound}, {"error", s.error}, {"ok", s.ok}});
    return json{{"subject", r.subject},
                {"relation", r.relation},
                {"bound", r.bound},
                {"margin", r.margin},
                {"samples", samples},
                {"tolerances", r.tolerances},
                {"data", r.data},
                {"notes", r.notes},
                {"failing_clause", r.failing_clause},
                {"verdict", r.verdict ? "pass" : "fail"}};
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_json(const json& j, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_grid_function(const GridFunction& u, const std::string& csv_path)
{
    const Grid& g = u.grid();
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    out << "index";
    for (int k = 1; k <= g.dim(); ++k) out << ",coord_" << k;
    out << ",value\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
        Point x = g.coord(i);
        out << i;
        for (int k = 0; k < g.dim(); ++k) out << ',' << format_double(x[k]);
        out << ',' << format_double(u[i]) << '\n';
    }
    write_json(json{{"grid", to_json(g)}, {"tail", to_json(u.tail())}, {"csv", std::filesystem::path(csv_path).filename().string()}}, csv_path + ".json");
}

GridFunction read_grid_function(const std::string& csv_path)
{
    std::ifstream side(csv_path + ".json");
    if (!side) throw std::runtime_error("missing sidecar " + csv_path + ".json");
    json meta = json::parse(side);
    Grid g = grid_from_json(meta.at("grid"));
    TailModel tail = tail_from_json(meta.at("tail"));

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot read " + csv_path);
    std::string line;
    std::getline(in, line);
    std::vector<double> values(g.size(), 0.0);
    std::vector<char> seen(g.size(), 0);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        std::size_t idx = std::stoull(cell);
        std::string last;
        while (std::getline(ss, cell, ',')) last = cell;
        if (idx >= g.size()) throw std::runtime_error("index out of range in " + csv_path);
        values[idx] = std::strtod(last.c_str(), nullptr);
        seen[idx] = 1;
    }
    for (char s : seen)
        if (!s) throw std::runtime_error("incomplete grid function in " + csv_path);
    return GridFunction(g, std::move(values), std::move(tail));
}

void write_certificate_csv(const CertificateReport& r, const std::string& csv_path)
{
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    std::size_t dim = r.samples.empty() ? 1 : r.samples.front().point.size();
    for (std::size_t k = 1; k <= dim; ++k) out << "coord_" << k << ',';
    out << "value,bound,error,ok\n";
    for (const auto& s : r.samples) {
        for (double c : s.point) out << format_double(c) << ',';
        out << format_double(s.value) << ',' << format_double(s.bound) << ',' << format_double(s.error) << ','
            << (s.ok ? 1 : 0) << '\n';
    }
}

}  // namespace nonlocal
