#pragma once

#include "gridshaper/controller.hpp"
#include "gridshaper/network.hpp"
#include "gridshaper/pnp.hpp"
#include "gridshaper/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridshaper {

struct SimulationOptions {
  /// Builds the shifted candidate from the previous solution at every step
  /// and records its residual in the next stage-2 program.
  bool check_candidates = false;
  /// Re-solves every delay below the chosen one for accepted deferrables.
  bool verify_min_delay = false;
};

/// Per-step active power split (p.u.). total = fixed + shapeable +
/// deferrable + battery; substation = total + losses.
struct PowerSplit {
  double fixed = 0.0;
  double shapeable = 0.0;
  double deferrable = 0.0;
  double battery = 0.0;
  double losses = 0.0;
  double substation = 0.0;
  double total() const { return fixed + shapeable + deferrable + battery; }
};

struct ShapeableSample {
  std::string id;
  int bus;
  double soc;    // at the start of the step
  double power;  // applied during the step
};

struct StepRecord {
  int step = 0;
  double price = 0.0;
  std::vector<ShapeableSample> shapeable;
  std::vector<double> battery_soc;    // at the start of the step
  std::vector<double> battery_power;  // applied
  std::vector<double> capacitor;      // per bus, applied
  FlowStep flow;                      // first step of the stage-2 solution
  PowerSplit power;
  double objective = 0.0;
  double relaxation_gap = 0.0;
  int solver_iterations = 0;
  std::optional<double> candidate_residual;
  std::string candidate_worst_row;
};

struct DecisionRecord {
  int step = 0;
  std::string id;
  RequestKind kind = RequestKind::Shapeable;
  int bus = 0;
  bool accepted = false;
  bool retry = false;
  int delay = 0;
  int plug_in_step = -1;
  std::string reason;
  int solves = 0;
  double solve_ms = 0.0;  // wall clock, kept out of the deterministic exports
  /// verify_min_delay: every smaller delay was re-solved and found infeasible.
  std::optional<bool> min_delay_confirmed;
};

/// Final state of a shapeable load when it left, or at the end of the run.
struct ShapeableOutcome {
  std::string id;
  int k_out = 0;
  double e_final = 0.0;
  double e_des = 0.0;
  bool left = false;  // false: still connected when the run ended
};

struct DeferrableOutcome {
  std::string id;
  int plug_in_step = 0;
  double energy_required = 0.0;  // p.u.h
  double energy_delivered = 0.0;
  bool finished = false;
};

struct SimulationTrace {
  int total_steps = 0;
  double dt = 0.5;
  std::vector<std::string> battery_ids;
  std::vector<StepRecord> steps;
  std::vector<std::vector<double>> battery_soc;  // [0..steps][battery], includes the final state
  std::vector<DecisionRecord> decisions;
  std::vector<ShapeableOutcome> shapeable_outcomes;
  std::vector<DeferrableOutcome> deferrable_outcomes;
  ReferenceTrajectory reference;
  /// Set when the run stopped on a stage-2 failure.
  std::optional<std::string> failure;
  int failure_step = -1;
  bool failure_infeasible = false;
};

struct Metrics {
  int steps = 0;
  double peak_controlled = 0.0;
  double peak_baseline = 0.0;
  double peak_reduction_ratio = 0.0;  // 1 - controlled / baseline
  double nu_max = 0.0;
  double nu_min = 0.0;
  double energy_cost = 0.0;  // sum over steps of price * total shapeable power
  int shapeable_requests = 0;
  int deferrable_requests = 0;
  int accepted = 0;
  int rejected = 0;
  int deferred_requests = 0;
  double mean_delay = 0.0;
  double max_relaxation_gap = 0.0;
  double max_candidate_residual = 0.0;
  int unsatisfied_shapeable = 0;
  int undelivered_deferrable = 0;
  int stage2_infeasible = 0;
  int stage2_numerical_failures = 0;
};

/// Closed receding-horizon loop. Stage-2 failures do not throw: the run
/// stops and the trace carries the failure; callers that need an exception
/// use require_success.
SimulationTrace run_simulation(const NetworkModel& model, const Scenario& scenario, const ControllerConfig& config,
                               const SimulationOptions& options = {});

/// Throws ProtocolViolation if the trace ended on a stage-2 failure.
void require_success(const SimulationTrace& trace);

/// Aggregate demand when every load starts at its request step and charges
/// at full rate; batteries and capacitors idle, voltages not enforced.
struct BaselineSeries {
  double dt = 0.5;
  std::vector<PowerSplit> steps;
  double peak() const;
};

BaselineSeries uncontrolled_baseline(const NetworkModel& model, const Scenario& scenario, double dt);

Metrics compute_metrics(const NetworkModel& model, const SimulationTrace& trace, const BaselineSeries& baseline);

/// Writes voltages.csv, soc_shapeable.csv, soc_battery.csv,
/// aggregate_power.csv, decisions.csv and metrics.json, plus
/// decision_log.jsonl with solve times. Creates `dir` if needed.
void export_trace(const NetworkModel& model, const SimulationTrace& trace, const Metrics& metrics,
                  const std::string& dir);

std::string metrics_to_json_text(const Metrics& metrics);

}  // namespace gridshaper
