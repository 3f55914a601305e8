#pragma once

#include "gridshaper/assets.hpp"
#include "gridshaper/formulation.hpp"
#include "gridshaper/network.hpp"
#include "gridshaper/socp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridshaper {

struct HorizonConfig {
  double dt = 0.5;  // hours
  int N = 10;
  int N_r = 96;

  /// Throws ConfigError unless dt > 0 and 0 < N < N_r.
  void validate() const;
};

/// Diagonal weights. A single entry is broadcast to every element.
/// T1 runs over the stage-1 controls (capacitors by bus, then batteries),
/// T2 and T3 over buses 1..n.
struct ControllerWeights {
  std::vector<double> T1{1.0};
  std::vector<double> T2{0.1};
  std::vector<double> T3{0.1};

  static double entry(const std::vector<double>& w, int i);
  void validate(int n_controls, int n_load_buses) const;
};

struct PriceSignal {
  std::vector<double> lambda;

  double at(int step) const;
  /// Two-level tariff with the higher price on [peak_start_h, peak_end_h).
  static PriceSignal time_of_use(double dt, int length, double offpeak = 1.0, double peak = 3.0,
                                 double peak_start_h = 16.0, double peak_end_h = 21.0);
};

struct ControllerConfig {
  HorizonConfig horizon;
  ControllerWeights weights;
  std::optional<double> nu_nom;  // defaults to the substation nu0
  PriceSignal price;
  /// Adds the recursive-feasibility rows to every stage-2 program.
  bool embed_lemma_rows = true;
  /// Weight on sum r * l in both stages. Without it the current cones have
  /// almost no dual pressure and the interior-point iterate stops short of
  /// the cone boundary.
  double loss_weight = 0.1;
  SolverOptions solver = SolverOptions::from_environment();

  double nominal(const NetworkModel& m) const { return nu_nom.value_or(m.nu0); }
};

/// Periodic stage-1 solution. Indices wrap modulo the period.
struct ReferenceTrajectory {
  int period = 0;
  std::vector<std::vector<double>> e_bat;  // [t][battery], t = 0..period
  std::vector<std::vector<double>> p_bat;  // [t][battery]
  std::vector<std::vector<double>> q_g;    // [t][bus]
  FlowSolution flows;
  double objective = 0.0;
  double relaxation_gap = 0.0;
  SolverReport report;

  int wrap(int step) const;
  double battery_soc(int step, int battery) const { return e_bat[wrap(step)][battery]; }
  double battery_power(int step, int battery) const { return p_bat[wrap(step)][battery]; }
  double capacitor(int step, int bus) const { return q_g[wrap(step)][bus]; }
  const FlowStep& flow(int step) const { return flows.steps[wrap(step)]; }
};

/// Stage-1: minimum-effort periodic schedule without flexible loads.
/// Throws ConfigError when the base network admits no feasible schedule.
ReferenceTrajectory solve_stage1(const NetworkModel& model, const RadialTopology& topo, const ControllerConfig& config);

/// c0 + sum coef * e_j(N+k), where j ranges over fleet positions.
struct AffineInSoc {
  double constant = 0.0;
  std::vector<std::pair<int, double>> coef;

  double eval(const std::vector<double>& e_terminal) const;
};

struct TerminalBounds {
  int load;  // fleet position
  double lower;
  double upper;
};

/// Battery-side terminal requirement at one bus. Buses without a battery
/// carry the same row with every battery quantity at zero.
struct BusTerminal {
  int bus;
  int battery;  // -1 when the bus has no battery
  AffineInSoc target;
};

struct TerminalSet {
  int step = 0;  // N + k
  std::optional<int> k_out_max;
  std::vector<TerminalBounds> shapeable;
  std::vector<BusTerminal> buses;
  bool empty = false;
  std::string reason;
};

TerminalSet build_terminal_set(const NetworkModel& model, const ReferenceTrajectory& reference, const Fleet& fleet,
                               int k, const HorizonConfig& horizon);

/// One recursive-feasibility condition at (bus, l); holds iff margin >= 0.
struct LemmaRow {
  int bus;
  int step;
  int family;  // 1: battery power floor, 2: battery energy ceiling
  AffineInSoc margin;
};

std::vector<LemmaRow> lemma1_rows(const NetworkModel& model, const ReferenceTrajectory& reference, const Fleet& fleet,
                                  int k, const HorizonConfig& horizon);

struct Lemma1Entry {
  int bus;
  int step;
  int family;
  double margin;
};

struct Lemma1Report {
  std::vector<Lemma1Entry> entries;
  double worst_margin = 0.0;
  bool holds(double tol = 1e-7) const { return worst_margin >= -tol; }
  std::vector<Lemma1Entry> violations(double tol = 1e-7) const;
};

/// Evaluates the conditions for given terminal shapeable SOCs (one per fleet
/// position). Throws DegenerateTailError for a load leaving exactly at N + k
/// below its desired SOC.
Lemma1Report check_lemma1_conditions(const NetworkModel& model, const ReferenceTrajectory& reference,
                                     const Fleet& fleet, const std::vector<double>& e_terminal, int k,
                                     const HorizonConfig& horizon);

struct MpcSolution {
  int step = 0;
  int horizon = 0;
  std::vector<std::string> shapeable_ids;
  std::vector<std::vector<double>> q_g;    // [i][bus]
  std::vector<std::vector<double>> c_shp;  // [i][load]
  std::vector<std::vector<double>> p_bat;  // [i][battery]
  std::vector<std::vector<double>> e_shp;  // [i][load], i = 0..N
  std::vector<std::vector<double>> e_bat;  // [i][battery], i = 0..N
  FlowSolution flows;
  double objective = 0.0;
  double price_cost = 0.0;
  double relaxation_gap = 0.0;
  SolverReport report;
  bool optimal() const { return report.optimal(); }
};

/// Stage-2 program with its terminal data, before solving.
struct Stage2Program {
  FlowProgram flow;
  TerminalSet terminal;
  std::vector<LemmaRow> lemma;
};

Stage2Program build_stage2_program(const NetworkModel& model, const RadialTopology& topo, const Fleet& fleet,
                                   const ReferenceTrajectory& reference, const ControllerConfig& config,
                                   const std::vector<double>& battery_soc, int k);

/// Solves stage-2 and returns the solution whatever the status; callers
/// check optimal().
MpcSolution solve_stage2(const NetworkModel& model, const RadialTopology& topo, const Fleet& fleet,
                         const ReferenceTrajectory& reference, const ControllerConfig& config,
                         const std::vector<double>& battery_soc, int k);

/// Controls and states over [k+1, k+N] built by keeping the tail of the
/// previous solution and appending the reference-tracking step at N + k.
struct ShiftedCandidate {
  int step = 0;  // k + 1
  std::vector<std::string> shapeable_ids;
  std::vector<std::vector<double>> q_g;
  std::vector<std::vector<double>> c_shp;
  std::vector<std::vector<double>> p_bat;
  std::vector<std::vector<double>> e_shp;
  std::vector<std::vector<double>> e_bat;
  FlowSolution flows;
};

/// `fleet` is the fleet at k+1 after plug-outs and before new admissions.
ShiftedCandidate construct_shifted_candidate(const NetworkModel& model, const MpcSolution& previous,
                                             const ReferenceTrajectory& reference, const Fleet& fleet,
                                             const HorizonConfig& horizon);

/// Largest violation of the candidate inside the stage-2 program built at
/// k + 1 (dynamics, network, envelopes, terminal set and condition rows).
std::pair<double, std::string> candidate_residual(const Stage2Program& program, const ShiftedCandidate& candidate,
                                                  const ControllerConfig& config);

}  // namespace gridshaper
