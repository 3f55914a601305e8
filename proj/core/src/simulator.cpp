#include "gridshaper/simulator.hpp"

#include "gridshaper/errors.hpp"
#include "gridshaper/io.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

namespace gridshaper {

namespace {

double fixed_load(const NetworkModel& m, int k) {
  double acc = 0.0;
  for (int i = 1; i < m.num_buses(); ++i) acc += m.forecast.p_at(k, i);
  return acc;
}

PowerSplit split_from_flow(const NetworkModel& m, const RadialTopology& topo, const FlowStep& f, int k) {
  PowerSplit p;
  p.fixed = fixed_load(m, k);
  for (int line = 0; line < m.num_lines(); ++line) {
    p.losses += m.lines[line].r * f.l[line];
    if (topo.upstream[line] == 0) p.substation += f.P[line];
  }
  return p;
}

void close_outcomes(SimulationTrace& trace, const Fleet& fleet, int k, bool end_of_run,
                    std::map<std::string, std::size_t>& def_pos) {
  for (const auto& l : fleet.shapeable()) {
    if (!end_of_run && l.k_out > k) continue;
    trace.shapeable_outcomes.push_back({l.id, l.k_out, l.e, l.e_des, !end_of_run});
  }
  for (const auto& d : fleet.deferrable()) {
    if (!end_of_run && d.end_step() > k) continue;
    auto& out = trace.deferrable_outcomes[def_pos.at(d.id)];
    out.finished = d.end_step() <= k;
  }
}

}  // namespace

SimulationTrace run_simulation(const NetworkModel& model, const Scenario& scenario, const ControllerConfig& config,
                               const SimulationOptions& options) {
  const HorizonConfig& hz = config.horizon;
  hz.validate();
  if (auto issues = validate_scenario(scenario, model, hz); !issues.empty()) throw ConfigError(issues.front());
  const auto topo = RadialTopology::build(model);
  const double dt = hz.dt;
  const int nbat = static_cast<int>(model.batteries.size());

  SimulationTrace trace;
  trace.total_steps = scenario.total_steps;
  trace.dt = dt;
  for (const auto& b : model.batteries) trace.battery_ids.push_back(b.id);
  trace.reference = solve_stage1(model, topo, config);
  const ControllerContext ctx{model, topo, config, trace.reference};

  SystemState state;
  for (int b = 0; b < nbat; ++b) state.battery_soc.push_back(trace.reference.battery_soc(0, b));
  trace.battery_soc.push_back(state.battery_soc);

  std::vector<const PlugRequest*> by_step;
  for (const auto& r : scenario.requests) by_step.push_back(&r);
  std::stable_sort(by_step.begin(), by_step.end(),
                   [](const PlugRequest* a, const PlugRequest* b) { return a->step < b->step; });
  std::size_t next_request = 0;
  std::vector<PlugRequest> retries;
  std::map<std::string, std::size_t> def_pos;
  std::optional<MpcSolution> previous;

  for (int k = 0; k < scenario.total_steps; ++k) {
    state.step = k;
    close_outcomes(trace, state.fleet, k, false, def_pos);
    state.fleet.remove_plugged_out(k);

    std::optional<double> cand_residual;
    std::string cand_row;
    if (options.check_candidates && previous) {
      try {
        const auto cand = construct_shifted_candidate(model, *previous, trace.reference, state.fleet, hz);
        const auto prog = build_stage2_program(model, topo, state.fleet, trace.reference, config, state.battery_soc, k);
        std::tie(cand_residual, cand_row) = candidate_residual(prog, cand, config);
      } catch (const DegenerateTailError& e) {
        cand_residual = std::numeric_limits<double>::infinity();
        cand_row = e.what();
      }
    }

    std::vector<PlugRequest> queue = std::move(retries);
    retries.clear();
    while (next_request < by_step.size() && by_step[next_request]->step == k) queue.push_back(*by_step[next_request++]);

    std::optional<MpcSolution> witness;
    for (auto req : queue) {
      req.step = k;
      AdmissionDecision d = admit(req, state, ctx);
      DecisionRecord rec;
      rec.step = k;
      rec.id = d.id;
      rec.kind = d.kind;
      rec.bus = req.bus();
      rec.accepted = d.accepted;
      rec.retry = d.retry;
      rec.delay = d.delay;
      rec.plug_in_step = d.plug_in_step;
      rec.reason = d.reason;
      rec.solves = static_cast<int>(d.attempts.size());
      rec.solve_ms = d.solve_ms;
      if (d.accepted) {
        if (options.verify_min_delay && d.kind == RequestKind::Deferrable) {
          const auto all = enumerate_delays(req, state, ctx);
          bool ok = all.at(d.delay).status == SolveStatus::Optimal;
          for (int m = 0; m < d.delay; ++m) ok = ok && all[m].status == SolveStatus::Infeasible;
          rec.min_delay_confirmed = ok;
        }
        apply_decision(state.fleet, d);
        if (d.kind == RequestKind::Deferrable) {
          def_pos[d.id] = trace.deferrable_outcomes.size();
          trace.deferrable_outcomes.push_back(
              {d.id, d.plug_in_step, d.deferrable.energy(dt), 0.0, false});
        }
        witness = std::move(d.witness);
      } else if (d.retry && k + 1 < scenario.total_steps) {
        retries.push_back(req);
      }
      trace.decisions.push_back(std::move(rec));
    }

    // the last admission solved exactly this program
    MpcSolution sol = witness ? std::move(*witness)
                              : solve_stage2(model, topo, state.fleet, trace.reference, config, state.battery_soc, k);
    if (!sol.optimal()) {
      trace.failure = "stage-2 " + std::string(to_string(sol.report.status)) + " at step " + std::to_string(k) +
                      (sol.report.message.empty() ? "" : ": " + sol.report.message);
      trace.failure_step = k;
      trace.failure_infeasible = sol.report.status == SolveStatus::Infeasible;
      break;
    }

    StepRecord rec;
    rec.step = k;
    rec.price = config.price.at(k);
    rec.flow = sol.flows.steps.front();
    rec.objective = sol.objective;
    rec.relaxation_gap = sol.relaxation_gap;
    rec.solver_iterations = sol.report.iterations;
    rec.candidate_residual = cand_residual;
    rec.candidate_worst_row = cand_row;
    rec.power = split_from_flow(model, topo, rec.flow, k);
    rec.capacitor = sol.q_g.front();

    try {
      auto& loads = state.fleet.shapeable_mut();
      for (std::size_t j = 0; j < loads.size(); ++j) {
        auto& l = loads[j];
        const bool connected = k >= l.k_in && k < l.k_out;
        const double c = std::clamp(sol.c_shp.front()[j], 0.0, connected ? l.c_max : 0.0);
        rec.shapeable.push_back({l.id, l.bus, l.e, c});
        rec.power.shapeable += c;
        l.e = step_soc(l.e, c, l.eta, dt, {shp_soc_min(l, k + 1, dt), l.e_max});
      }
      for (int b = 0; b < nbat; ++b) {
        const auto& bat = model.batteries[b];
        const double p = std::clamp(sol.p_bat.front()[b], bat.p_min, bat.p_max);
        rec.battery_soc.push_back(state.battery_soc[b]);
        rec.battery_power.push_back(p);
        rec.power.battery += p;
        state.battery_soc[b] = step_soc(state.battery_soc[b], p, bat.eta, dt, {bat.e_low, bat.e_max});
      }
    } catch (const EnvelopeViolation& e) {
      trace.failure = std::string("applied control left the SOC envelope at step ") + std::to_string(k) + ": " +
                      e.what();
      trace.failure_step = k;
      break;
    }
    for (const auto& d : state.fleet.deferrable()) {
      const double p = d.power_at(k);
      rec.power.deferrable += p;
      trace.deferrable_outcomes[def_pos.at(d.id)].energy_delivered += p * dt;
    }
    trace.steps.push_back(std::move(rec));
    trace.battery_soc.push_back(state.battery_soc);
    previous = std::move(sol);
  }

  const int end = trace.failure ? trace.failure_step : scenario.total_steps;
  close_outcomes(trace, state.fleet, end, false, def_pos);
  state.fleet.remove_plugged_out(end);
  close_outcomes(trace, state.fleet, end, true, def_pos);
  return trace;
}

void require_success(const SimulationTrace& trace) {
  if (trace.failure) throw ProtocolViolation(*trace.failure);
}

double BaselineSeries::peak() const {
  double p = 0.0;
  for (const auto& s : steps) p = std::max(p, s.total());
  return p;
}

BaselineSeries uncontrolled_baseline(const NetworkModel& model, const Scenario& scenario, double dt) {
  BaselineSeries out;
  out.dt = dt;
  out.steps.resize(std::max(0, scenario.total_steps));
  for (int k = 0; k < scenario.total_steps; ++k) out.steps[k].fixed = fixed_load(model, k);
  for (const auto& r : scenario.requests) {
    if (r.kind == RequestKind::Shapeable) {
      double e = r.shapeable.e;
      const auto& l = r.shapeable;
      for (int k = r.step; k < scenario.total_steps && e < l.e_des - 1e-12; ++k) {
        const double c = std::min(l.c_max, (l.e_des - e) / (l.eta * dt));
        out.steps[k].shapeable += c;
        e += l.eta * dt * c;
      }
    } else {
      const auto& prof = r.deferrable.profile;
      for (std::size_t i = 0; i < prof.size(); ++i) {
        const int k = r.step + static_cast<int>(i);
        if (k >= scenario.total_steps) break;
        out.steps[k].deferrable += prof[i];
      }
    }
  }
  for (auto& s : out.steps) s.substation = s.total();
  return out;
}

Metrics compute_metrics(const NetworkModel& model, const SimulationTrace& trace, const BaselineSeries& baseline) {
  Metrics m;
  m.steps = static_cast<int>(trace.steps.size());
  m.peak_baseline = baseline.peak();
  m.nu_min = std::numeric_limits<double>::infinity();
  m.nu_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : trace.steps) {
    m.peak_controlled = std::max(m.peak_controlled, s.power.total());
    for (int i = 1; i < model.num_buses(); ++i) {
      m.nu_min = std::min(m.nu_min, s.flow.nu[i]);
      m.nu_max = std::max(m.nu_max, s.flow.nu[i]);
    }
    m.energy_cost += s.price * s.power.shapeable;
    m.max_relaxation_gap = std::max(m.max_relaxation_gap, s.relaxation_gap);
    if (s.candidate_residual) m.max_candidate_residual = std::max(m.max_candidate_residual, *s.candidate_residual);
  }
  if (trace.steps.empty()) m.nu_min = m.nu_max = 0.0;
  m.peak_reduction_ratio = m.peak_baseline > 0.0 ? 1.0 - m.peak_controlled / m.peak_baseline : 0.0;

  int delays = 0, admitted_def = 0;
  for (const auto& d : trace.decisions) {
    if (d.retry) continue;
    (d.kind == RequestKind::Shapeable ? m.shapeable_requests : m.deferrable_requests)++;
    (d.accepted ? m.accepted : m.rejected)++;
    if (d.accepted && d.kind == RequestKind::Deferrable) {
      ++admitted_def;
      delays += d.delay;
      if (d.delay > 0) ++m.deferred_requests;
    }
  }
  m.mean_delay = admitted_def > 0 ? static_cast<double>(delays) / admitted_def : 0.0;
  for (const auto& o : trace.shapeable_outcomes)
    if (o.left && o.e_final < o.e_des - 1e-6) ++m.unsatisfied_shapeable;
  for (const auto& o : trace.deferrable_outcomes)
    if (o.finished && std::abs(o.energy_delivered - o.energy_required) > 1e-9) ++m.undelivered_deferrable;
  if (trace.failure && trace.failure_step >= 0) {
    if (trace.failure_infeasible)
      ++m.stage2_infeasible;
    else
      ++m.stage2_numerical_failures;
  }
  return m;
}

namespace {

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  CsvWriter& cell(const std::string& s) {
    sep();
    out_ << csv_text(s);
    return *this;
  }
  CsvWriter& cell(double v) {
    sep();
    out_ << format_number(v);
    return *this;
  }
  CsvWriter& cell(int v) {
    sep();
    out_ << v;
    return *this;
  }
  void end_row() {
    out_ << "\n";
    first_ = true;
  }
  std::string str() const { return out_.str(); }

private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }
  std::ostringstream out_;
  bool first_ = true;
};

}  // namespace

std::string metrics_to_json_text(const Metrics& m) {
  // numbers go through format_number so the file is stable across runs
  auto num = [](double v) { return detail::Json::parse(std::isfinite(v) ? format_number(v) : "null"); };
  detail::Json j;
  j["steps"] = m.steps;
  j["peak_controlled"] = num(m.peak_controlled);
  j["peak_baseline"] = num(m.peak_baseline);
  j["peak_reduction_ratio"] = num(m.peak_reduction_ratio);
  j["nu_max"] = num(m.nu_max);
  j["nu_min"] = num(m.nu_min);
  j["energy_cost"] = num(m.energy_cost);
  j["shapeable_requests"] = m.shapeable_requests;
  j["deferrable_requests"] = m.deferrable_requests;
  j["accepted"] = m.accepted;
  j["rejected"] = m.rejected;
  j["deferred_requests"] = m.deferred_requests;
  j["mean_delay"] = num(m.mean_delay);
  j["max_relaxation_gap"] = num(m.max_relaxation_gap);
  j["max_candidate_residual"] = num(m.max_candidate_residual);
  j["unsatisfied_shapeable"] = m.unsatisfied_shapeable;
  j["undelivered_deferrable"] = m.undelivered_deferrable;
  j["stage2_infeasible"] = m.stage2_infeasible;
  j["stage2_numerical_failures"] = m.stage2_numerical_failures;
  return j.dump(2) + "\n";
}

void export_trace(const NetworkModel& model, const SimulationTrace& trace, const Metrics& metrics,
                  const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(dir + ": cannot create output directory (" + ec.message() + ")");
  auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  const double dt = trace.dt;

  std::vector<std::string> vh{"step", "time_h"};
  for (int i = 1; i < model.num_buses(); ++i) vh.push_back("nu_" + std::to_string(i));
  CsvWriter volt(vh);
  for (const auto& s : trace.steps) {
    volt.cell(s.step).cell(s.step * dt);
    for (int i = 1; i < model.num_buses(); ++i) volt.cell(s.flow.nu[i]);
    volt.end_row();
  }
  write_text_file(path("voltages.csv"), volt.str());

  CsvWriter shp({"step", "time_h", "id", "bus", "soc", "power"});
  for (const auto& s : trace.steps)
    for (const auto& l : s.shapeable) {
      shp.cell(s.step).cell(s.step * dt).cell(l.id).cell(l.bus).cell(l.soc).cell(l.power);
      shp.end_row();
    }
  write_text_file(path("soc_shapeable.csv"), shp.str());

  std::vector<std::string> bh{"step", "time_h"};
  for (const auto& id : trace.battery_ids) bh.push_back(id);
  CsvWriter bat(bh);
  if (!trace.steps.empty())
    for (std::size_t t = 0; t < trace.battery_soc.size(); ++t) {
      bat.cell(static_cast<int>(t)).cell(static_cast<double>(t) * dt);
      for (double e : trace.battery_soc[t]) bat.cell(e);
      bat.end_row();
    }
  write_text_file(path("soc_battery.csv"), bat.str());

  CsvWriter agg({"step", "time_h", "fixed", "shapeable", "deferrable", "battery", "total", "losses", "substation"});
  for (const auto& s : trace.steps) {
    const auto& p = s.power;
    agg.cell(s.step).cell(s.step * dt).cell(p.fixed).cell(p.shapeable).cell(p.deferrable).cell(p.battery);
    agg.cell(p.total()).cell(p.losses).cell(p.substation);
    agg.end_row();
  }
  write_text_file(path("aggregate_power.csv"), agg.str());

  CsvWriter dec({"step", "id", "kind", "bus", "accepted", "delay", "plug_in_step", "reason"});
  std::ostringstream log;
  for (const auto& d : trace.decisions) {
    dec.cell(d.step).cell(d.id).cell(std::string(to_string(d.kind))).cell(d.bus);
    dec.cell(d.accepted ? 1 : 0).cell(d.delay).cell(d.plug_in_step).cell(d.reason);
    dec.end_row();
    detail::Json j;
    j["step"] = d.step;
    j["id"] = d.id;
    j["kind"] = to_string(d.kind);
    j["accepted"] = d.accepted;
    j["delay"] = d.delay;
    j["reason"] = d.reason;
    j["solves"] = d.solves;
    j["solve_ms"] = std::round(d.solve_ms * 1000.0) / 1000.0;
    log << j.dump() << "\n";
  }
  write_text_file(path("decisions.csv"), dec.str());
  write_text_file(path("decision_log.jsonl"), log.str());
  write_text_file(path("metrics.json"), metrics_to_json_text(metrics));
}

}  // namespace gridshaper
