#pragma once

#include "gridshaper/assets.hpp"
#include "gridshaper/controller.hpp"
#include "gridshaper/network.hpp"

#include <string>
#include <vector>

namespace gridshaper {

enum class RequestKind { Shapeable, Deferrable };

const char* to_string(RequestKind kind);

/// A plug-in request. Only the member matching `kind` is meaningful; the
/// admission step fills in k_in / plug_in_step.
struct PlugRequest {
  RequestKind kind = RequestKind::Shapeable;
  int step = 0;
  ShapeableLoad shapeable;
  DeferrableLoad deferrable;

  const std::string& id() const { return kind == RequestKind::Shapeable ? shapeable.id : deferrable.id; }
  int bus() const { return kind == RequestKind::Shapeable ? shapeable.bus : deferrable.bus; }
};

/// Parameter checks that do not depend on the network state. Returns the
/// first problem found, empty when the request is well formed.
std::string validate_request(const PlugRequest& request, const NetworkModel& model, const HorizonConfig& horizon);

struct ControllerContext {
  const NetworkModel& model;
  const RadialTopology& topo;
  const ControllerConfig& config;
  const ReferenceTrajectory& reference;
};

struct SystemState {
  int step = 0;
  Fleet fleet;
  std::vector<double> battery_soc;
};

struct DelayAttempt {
  int delay;
  SolveStatus status;
};

struct AdmissionDecision {
  bool accepted = false;
  /// Numerical trouble, not infeasibility: the request should be retried
  /// at the next step.
  bool retry = false;
  RequestKind kind = RequestKind::Shapeable;
  std::string id;
  int step = 0;
  int plug_in_step = -1;
  int delay = 0;
  std::string reason;
  std::vector<DelayAttempt> attempts;
  double solve_ms = 0.0;
  /// Stage-2 solution for the extended fleet at `step`.
  MpcSolution witness;
  /// The load as admitted, with its plug-in data filled in.
  ShapeableLoad shapeable;
  DeferrableLoad deferrable;
};

AdmissionDecision admit_shapeable(const PlugRequest& request, const SystemState& state, const ControllerContext& ctx);

/// Tries d = 0, 1, ..., d_max and accepts the first delay whose stage-2
/// program is feasible.
AdmissionDecision admit_deferrable(const PlugRequest& request, const SystemState& state, const ControllerContext& ctx);

AdmissionDecision admit(const PlugRequest& request, const SystemState& state, const ControllerContext& ctx);

/// Status of the stage-2 program for every delay 0..d_max, without early exit.
std::vector<DelayAttempt> enumerate_delays(const PlugRequest& request, const SystemState& state,
                                           const ControllerContext& ctx);

/// Adds an accepted load to the fleet. Throws std::invalid_argument for a
/// rejected decision or a duplicate id; the fleet is then unchanged.
void apply_decision(Fleet& fleet, const AdmissionDecision& decision);

}  // namespace gridshaper
