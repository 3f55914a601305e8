#pragma once

#include "gridshaper/controller.hpp"
#include "gridshaper/network.hpp"
#include "gridshaper/pnp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gridshaper {

/// Scripted requests over a run. File references are kept as written;
/// load_scenario resolves them against the scenario's directory.
struct Scenario {
  std::string network_file;
  std::string config_file;
  int total_steps = 60;
  std::uint64_t seed = 0;
  std::vector<PlugRequest> requests;  // processed in this order within a step
};

/// Request energies and powers in p.u. unless suffixed (_kwh, _kw), which
/// are converted with `base`.
Scenario scenario_from_json_text(const std::string& text, const PerUnitBase& base = {});
Scenario load_scenario(const std::string& path, const PerUnitBase& base = {});
std::string scenario_to_json_text(const Scenario& scenario);

/// Checks request ids, steps and parameters against the network and horizon.
std::vector<std::string> validate_scenario(const Scenario& scenario, const NetworkModel& model,
                                           const HorizonConfig& horizon);

/// `dir` resolves a price file reference.
ControllerConfig config_from_json_text(const std::string& text, const std::string& dir = ".");
ControllerConfig load_config(const std::string& path);

/// Parameters for random request streams. Rates are expected arrivals per
/// hour; the remaining ranges are sampled uniformly.
struct GeneratorParams {
  int total_steps = 60;
  double dt = 0.5;
  double shapeable_rate = 0.45;
  double deferrable_rate = 0.55;
  double e0_min = 0.0, e0_max = 0.05;
  double need_min = 0.05, need_max = 0.15;  // e_des - e0
  double c_max_min = 0.04, c_max_max = 0.08;
  double eta = 0.9;
  int slack_min = 2, slack_max = 16;  // steps beyond the fastest charge
  double profile_power_min = 0.02, profile_power_max = 0.06;
  int profile_len_min = 2, profile_len_max = 5;
  int d_max = 4;
  /// Requests are drawn so every load leaves or finishes before this step.
  int last_departure = 58;
};

/// Deterministic for a given seed. Buses are drawn uniformly from 1..n-1.
Scenario generate_scenario(std::uint64_t seed, const NetworkModel& model, const GeneratorParams& params);

}  // namespace gridshaper
