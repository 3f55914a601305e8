#pragma once

#include "gridshaper/assets.hpp"

#include <string>
#include <vector>

namespace gridshaper {

struct PerUnitBase {
  double s_base_kva = 1000.0;
  double v_base_kv = 12.47;

  double z_base_ohm() const { return v_base_kv * v_base_kv * 1000.0 / s_base_kva; }
  double power_to_pu(double kw) const { return kw / s_base_kva; }
  double power_from_pu(double pu) const { return pu * s_base_kva; }
  double energy_to_pu(double kwh) const { return kwh / s_base_kva; }
  double energy_from_pu(double puh) const { return puh * s_base_kva; }
  double impedance_to_pu(double ohm) const { return ohm / z_base_ohm(); }
  double impedance_from_pu(double pu) const { return pu * z_base_ohm(); }
  double voltage_to_pu(double kv) const { return kv / v_base_kv; }
  double voltage_from_pu(double pu) const { return pu * v_base_kv; }
};

struct Bus {
  int id = 0;
  bool has_capacitor = false;
  double q_min = 0.0;
  double q_max = 0.0;
  int battery = -1;  // index into NetworkModel::batteries
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
};

/// Fixed-load forecast, one row per step and one column per non-root bus
/// (column i-1 holds bus i). Indices wrap with the forecast length.
struct FixedLoadForecast {
  std::vector<std::vector<double>> p;
  std::vector<std::vector<double>> q;

  int length() const { return static_cast<int>(p.size()); }
  double p_at(int step, int bus) const;
  double q_at(int step, int bus) const;
};

struct NetworkModel {
  std::vector<Bus> buses;  // buses[0] is the substation
  std::vector<Line> lines;
  std::vector<BatteryBank> batteries;
  double nu0 = 1.0;
  double nu_min = 0.95 * 0.95;
  double nu_max = 1.0;
  FixedLoadForecast forecast;
  PerUnitBase base;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  /// Battery index at `bus` or -1.
  int battery_at(int bus) const;
};

/// Empty iff the lines form a spanning tree rooted at bus 0 and every bound
/// and reference in the model is consistent.
std::vector<std::string> validate_topology(const NetworkModel& model);

/// Lines oriented away from the substation, with per-bus parent and child
/// lists and a breadth-first bus order. Built once per model.
struct RadialTopology {
  std::vector<int> upstream;    // per line
  std::vector<int> downstream;  // per line
  std::vector<int> parent_line;  // per bus, -1 at the root
  std::vector<std::vector<int>> child_lines;
  std::vector<int> order;  // root first

  /// Throws ConfigError listing the violations when the model is not radial.
  static RadialTopology build(const NetworkModel& model);
};

/// Child lines (j,k) of bus j. Throws std::out_of_range for an unknown bus.
std::vector<int> downstream_lines(const NetworkModel& model, int bus);

/// Line quantities oriented from the upstream bus, P/Q/l indexed by line,
/// nu indexed by bus (nu[0] = substation).
struct FlowStep {
  std::vector<double> P;
  std::vector<double> Q;
  std::vector<double> l;
  std::vector<double> nu;
};

struct FlowSolution {
  std::vector<FlowStep> steps;
};

struct DistFlowResidual {
  double real_balance = 0.0;
  double reactive_balance = 0.0;
  double voltage_drop = 0.0;
  double current = 0.0;

  double max() const;
};

/// Residuals of the exact branch-flow equations for net per-bus consumption
/// p, q (bus 0 entries ignored).
DistFlowResidual distflow_residual(const NetworkModel& model, const RadialTopology& topo, const FlowStep& flow,
                                   const std::vector<double>& p, const std::vector<double>& q);

struct SweepOptions {
  int max_iterations = 1000;
  double tolerance = 1e-12;
};

/// Backward-forward sweep of the exact (non-relaxed) branch-flow equations.
/// p and q are net consumption per bus. Throws DivergenceError.
FlowStep solve_exact_distflow(const NetworkModel& model, const std::vector<double>& p, const std::vector<double>& q,
                              SweepOptions options = {});

}  // namespace gridshaper
