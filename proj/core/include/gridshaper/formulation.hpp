#pragma once

#include "gridshaper/assets.hpp"
#include "gridshaper/network.hpp"
#include "gridshaper/socp.hpp"

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace gridshaper {

enum class Quantity { P, Q, l, nu, qg, pbat, cshp, eshp, ebat, epigraph };

const char* to_string(Quantity q);

/// (quantity, element, step) -> column. Elements are line indices, bus ids,
/// battery indices or fleet positions depending on the quantity.
class VariableIndex {
public:
  void add(Quantity q, int element, int step, int column);
  int at(Quantity q, int element, int step) const;
  std::optional<int> find(Quantity q, int element, int step) const;
  int size() const { return static_cast<int>(map_.size()); }

private:
  std::map<std::tuple<int, int, int>, int> map_;
};

/// A multi-period program over control steps [start, start + horizon) and
/// state steps [start, start + horizon]. Columns are created step-major,
/// then by quantity, then by element.
class FlowProgram {
public:
  FlowProgram(const NetworkModel& model, const RadialTopology& topo, Fleet fleet, int start, int horizon, double dt);

  ConicProgram& program() { return program_; }
  const ConicProgram& program() const { return program_; }
  const VariableIndex& index() const { return index_; }
  const NetworkModel& model() const { return *model_; }
  const RadialTopology& topology() const { return *topo_; }
  const Fleet& fleet() const { return fleet_; }
  int start() const { return start_; }
  int horizon() const { return horizon_; }
  double dt() const { return dt_; }

  int col(Quantity q, int element, int step) const { return index_.at(q, element, step); }
  LinExpr var(Quantity q, int element, int step) const { return LinExpr::var(col(q, element, step)); }
  /// nu at bus i; the substation voltage enters as a constant.
  LinExpr nu(int bus, int step) const;
  /// Registers a per-step auxiliary column (epigraph) in the index.
  void register_epigraph(int step, int column) { index_.add(Quantity::epigraph, 0, step, column); }

  FlowSolution flows(const std::vector<double>& x) const;

private:
  const NetworkModel* model_;
  const RadialTopology* topo_;
  Fleet fleet_;
  int start_;
  int horizon_;
  double dt_;
  ConicProgram program_;
  VariableIndex index_;
};

struct AssemblyCounts {
  int linear_rows = 0;
  int cone_blocks = 0;
  int bound_rows = 0;
};

struct FeasibleSetOptions {
  bool wrap_forecast = true;
  /// When false the SOC envelope is not imposed on the state at `start`,
  /// which is measured data pinned by the caller.
  bool envelope_at_start = false;
  /// When false the last state step gets no envelope rows, and neither do
  /// shapeable loads leaving inside the horizon from k_out on; a terminal
  /// set added by the caller covers them.
  bool envelope_at_end = true;
};

/// Branch-flow rows, relaxed current cones, device boxes and SOC envelopes.
/// p_def[t - start][bus] are the fixed deferrable injections.
AssemblyCounts assemble_feasible_set(FlowProgram& fp, const std::vector<std::vector<double>>& p_def,
                                     FeasibleSetOptions options = {});

/// SOC transition rows for every shapeable load and battery over the horizon.
int assemble_dynamics(FlowProgram& fp);

/// Relative gap max |l nu_i - P^2 - Q^2| / max(1, P^2 + Q^2) over one step.
double relaxation_gap(const NetworkModel& model, const RadialTopology& topo, const FlowStep& step);
double relaxation_gap(const NetworkModel& model, const RadialTopology& topo, const FlowSolution& flows);

struct GapFlag {
  int step;
  int line;
  double gap;
};

struct GapReport {
  double max_gap = 0.0;
  std::vector<GapFlag> flagged;
  bool exact() const { return flagged.empty(); }
};

/// Flags every (step, line) whose relative gap exceeds tol. Steps are
/// positions within the solution.
GapReport check_relaxation_exactness(const NetworkModel& model, const FlowSolution& solution, double tol = 1e-5);

}  // namespace gridshaper
