#pragma once

#include "gridshaper/network.hpp"

#include <string>

namespace gridshaper {

/// Parses a network document. Values are per unit unless the key carries a
/// unit suffix (_kw, _kvar, _kwh, _ohm), which is converted with the base.
/// Throws ConfigError on malformed input; topology is not validated here.
NetworkModel network_from_json_text(const std::string& text);
NetworkModel load_network(const std::string& path);
std::string network_to_json_text(const NetworkModel& model);

/// Reads a whole file, throwing ConfigError with the path on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Shortest decimal form with 12 significant digits.
std::string format_number(double v);

}  // namespace gridshaper
