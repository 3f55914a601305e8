#include "gridshaper/pnp.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace gridshaper {

const char* to_string(RequestKind kind) { return kind == RequestKind::Shapeable ? "shapeable" : "deferrable"; }

std::string validate_request(const PlugRequest& r, const NetworkModel& model, const HorizonConfig& horizon) {
  if (r.id().empty()) return "request without id";
  if (r.bus() < 1 || r.bus() >= model.num_buses())
    return "request '" + r.id() + "' names bus " + std::to_string(r.bus()) + " outside 1.." +
           std::to_string(model.num_buses() - 1);
  if (r.step < 0) return "request '" + r.id() + "' has a negative step";
  if (r.kind == RequestKind::Shapeable) {
    const auto& l = r.shapeable;
    if (!(l.c_max > 0.0)) return "shapeable '" + l.id + "' needs c_max > 0";
    if (!(l.eta > 0.0 && l.eta <= 1.0)) return "shapeable '" + l.id + "' needs 0 < eta <= 1";
    if (!(l.e_low >= 0.0 && l.e_low <= l.e_max)) return "shapeable '" + l.id + "' needs 0 <= e_low <= e_max";
    if (!(l.e_des >= l.e_low && l.e_des <= l.e_max)) return "shapeable '" + l.id + "' needs e_low <= e_des <= e_max";
    if (!(l.e >= 0.0 && l.e <= l.e_max)) return "shapeable '" + l.id + "' has an initial SOC outside [0, e_max]";
    if (l.k_out <= r.step) return "shapeable '" + l.id + "' leaves before it arrives";
    return {};
  }
  const auto& d = r.deferrable;
  if (d.profile.empty()) return "deferrable '" + d.id + "' has an empty profile";
  for (double p : d.profile)
    if (!std::isfinite(p) || p < 0.0) return "deferrable '" + d.id + "' has a negative or non-finite profile entry";
  if (d.d_max < 0) return "deferrable '" + d.id + "' has a negative d_max";
  if (d.d_max >= horizon.N)
    return "deferrable '" + d.id + "' allows a delay of " + std::to_string(d.d_max) + " steps, horizon is " +
           std::to_string(horizon.N);
  return {};
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

MpcSolution tentative(const Fleet& fleet, const SystemState& state, const ControllerContext& ctx) {
  return solve_stage2(ctx.model, ctx.topo, fleet, ctx.reference, ctx.config, state.battery_soc, state.step);
}

AdmissionDecision base_decision(const PlugRequest& r, const SystemState& state) {
  AdmissionDecision d;
  d.kind = r.kind;
  d.id = r.id();
  d.step = state.step;
  return d;
}

DeferrableLoad delayed(const PlugRequest& r, int step, int delay) {
  DeferrableLoad load = r.deferrable;
  load.request_step = step;
  load.plug_in_step = step + delay;
  return load;
}

}  // namespace

AdmissionDecision admit_shapeable(const PlugRequest& r, const SystemState& state, const ControllerContext& ctx) {
  if (r.kind != RequestKind::Shapeable) throw std::invalid_argument("admit_shapeable: deferrable request");
  AdmissionDecision d = base_decision(r, state);
  const auto t0 = Clock::now();
  if (auto problem = validate_request(r, ctx.model, ctx.config.horizon); !problem.empty()) {
    d.reason = problem;
    return d;
  }
  if (state.fleet.contains(r.id())) {
    d.reason = "id '" + r.id() + "' is already connected";
    return d;
  }
  ShapeableLoad load = r.shapeable;
  load.k_in = state.step;
  if (load.e > load.e_des + 1e-12) {
    d.reason = "initial SOC above the desired SOC";
    return d;
  }
  if (load.e < shp_soc_min(load, state.step, ctx.config.horizon.dt) - 1e-9) {
    d.reason = "e_des not reachable by k_out at c_max; lower requirements: later k_out or lower e_des";
    return d;
  }

  Fleet trial = state.fleet;
  trial.add_shapeable(load);
  d.witness = tentative(trial, state, ctx);
  d.solve_ms = ms_since(t0);
  d.attempts.push_back({0, d.witness.report.status});
  if (d.witness.optimal()) {
    d.accepted = true;
    d.plug_in_step = state.step;
    d.shapeable = load;
  } else if (d.witness.report.status == SolveStatus::Infeasible) {
    d.reason = "no feasible schedule; lower requirements: later k_out or lower e_des";
  } else {
    d.retry = true;
    d.reason = std::string("solver ") + to_string(d.witness.report.status) + ", admission deferred one step";
  }
  return d;
}

AdmissionDecision admit_deferrable(const PlugRequest& r, const SystemState& state, const ControllerContext& ctx) {
  if (r.kind != RequestKind::Deferrable) throw std::invalid_argument("admit_deferrable: shapeable request");
  AdmissionDecision d = base_decision(r, state);
  const auto t0 = Clock::now();
  if (auto problem = validate_request(r, ctx.model, ctx.config.horizon); !problem.empty()) {
    d.reason = problem;
    return d;
  }
  if (state.fleet.contains(r.id())) {
    d.reason = "id '" + r.id() + "' is already connected";
    return d;
  }
  bool numerical = false;
  for (int delay = 0; delay <= r.deferrable.d_max; ++delay) {
    Fleet trial = state.fleet;
    trial.add_deferrable(delayed(r, state.step, delay));
    MpcSolution sol = tentative(trial, state, ctx);
    d.attempts.push_back({delay, sol.report.status});
    if (sol.optimal()) {
      d.accepted = true;
      d.delay = delay;
      d.plug_in_step = state.step + delay;
      d.deferrable = delayed(r, state.step, delay);
      d.witness = std::move(sol);
      break;
    }
    if (sol.report.status != SolveStatus::Infeasible) numerical = true;
  }
  d.solve_ms = ms_since(t0);
  if (!d.accepted) {
    d.reason = "no feasible delay up to d_max = " + std::to_string(r.deferrable.d_max);
    if (numerical) d.reason += " (solver failures on some delays)";
  }
  return d;
}

AdmissionDecision admit(const PlugRequest& r, const SystemState& state, const ControllerContext& ctx) {
  return r.kind == RequestKind::Shapeable ? admit_shapeable(r, state, ctx) : admit_deferrable(r, state, ctx);
}

std::vector<DelayAttempt> enumerate_delays(const PlugRequest& r, const SystemState& state,
                                           const ControllerContext& ctx) {
  if (r.kind != RequestKind::Deferrable) throw std::invalid_argument("enumerate_delays: shapeable request");
  std::vector<DelayAttempt> out;
  for (int delay = 0; delay <= r.deferrable.d_max; ++delay) {
    Fleet trial = state.fleet;
    trial.add_deferrable(delayed(r, state.step, delay));
    out.push_back({delay, tentative(trial, state, ctx).report.status});
  }
  return out;
}

void apply_decision(Fleet& fleet, const AdmissionDecision& decision) {
  if (!decision.accepted) throw std::invalid_argument("cannot apply a rejected request '" + decision.id + "'");
  if (decision.kind == RequestKind::Shapeable)
    fleet.add_shapeable(decision.shapeable);
  else
    fleet.add_deferrable(decision.deferrable);
}

}  // namespace gridshaper
