#pragma once

#include <string>

#include "json.hpp"
#include "nonlocal/core.hpp"

namespace nonlocal {

nlohmann::json to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TailModel& tail);
TailModel tail_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FracParams& params);
nlohmann::json to_json(const CertificateReport& report);

// 17 significant digits, round-trips exactly
std::string format_double(double v);

// CSV `index,coord_1..coord_n,value` plus `<path>.json` sidecar with grid and tail
void write_grid_function(const GridFunction& u, const std::string& csv_path);
GridFunction read_grid_function(const std::string& csv_path);

void write_certificate_csv(const CertificateReport& report, const std::string& csv_path);
void write_json(const nlohmann::json& j, const std::string& path);

}  // namespace nonlocal
