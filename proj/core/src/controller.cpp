#include "gridshaper/controller.hpp"

#include "gridshaper/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace gridshaper {

void HorizonConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("step length must be positive");
  if (N <= 0) throw ConfigError("horizon N must be positive");
  if (N >= N_r) throw ConfigError("horizon N must be shorter than the reference period N_r");
}

double ControllerWeights::entry(const std::vector<double>& w, int i) {
  if (w.empty()) throw ConfigError("empty weight vector");
  return w.size() == 1 ? w[0] : w.at(i);
}

void ControllerWeights::validate(int n_controls, int n_load_buses) const {
  auto check = [](const std::vector<double>& w, int n, const char* name, bool strict) {
    if (w.size() != 1 && static_cast<int>(w.size()) != n)
      throw ConfigError(std::string(name) + " needs 1 or " + std::to_string(n) + " entries");
    for (double v : w)
      if (!std::isfinite(v) || v < 0.0 || (strict && v == 0.0))
        throw ConfigError(std::string(name) + (strict ? " entries must be positive" : " entries must be nonnegative"));
  };
  check(T1, n_controls, "T1", true);
  check(T2, n_load_buses, "T2", false);
  check(T3, n_load_buses, "T3", false);
}

double PriceSignal::at(int step) const {
  if (lambda.empty()) return 0.0;
  const int n = static_cast<int>(lambda.size());
  return lambda[((step % n) + n) % n];
}

PriceSignal PriceSignal::time_of_use(double dt, int length, double offpeak, double peak, double peak_start_h,
                                     double peak_end_h) {
  PriceSignal p;
  for (int t = 0; t < length; ++t) {
    const double hour = std::fmod(t * dt, 24.0);
    p.lambda.push_back(hour >= peak_start_h && hour < peak_end_h ? peak : offpeak);
  }
  return p;
}

int ReferenceTrajectory::wrap(int step) const {
  const int m = step % period;
  return m < 0 ? m + period : m;
}

namespace {

// sum of T * (nu - nu_nom)^2 over load buses plus optional control terms,
// lowered to one epigraph column per step
int add_step_cost(FlowProgram& fp, int t, const std::vector<double>& Tv, double nu_nom, double loss_weight,
                  std::vector<std::pair<double, LinExpr>> terms) {
  const NetworkModel& m = fp.model();
  for (int i = 1; i < m.num_buses(); ++i) {
    LinExpr dev = fp.var(Quantity::nu, i, t);
    dev += -nu_nom;
    terms.emplace_back(ControllerWeights::entry(Tv, i - 1), dev);
  }
  const int col = fp.program().add_square_epigraph(terms, "epi@" + std::to_string(t));
  if (loss_weight > 0.0)
    for (int k = 0; k < m.num_lines(); ++k)
      fp.program().add_objective(fp.col(Quantity::l, k, t), loss_weight * m.lines[k].r);
  fp.register_epigraph(t, col);
  fp.program().add_objective(col, 1.0);
  return col;
}

double step_cost_value(const NetworkModel& m, const std::vector<double>& Tv, double nu_nom, const FlowStep& f) {
  double acc = 0.0;
  for (int i = 1; i < m.num_buses(); ++i) {
    const double d = f.nu[i] - nu_nom;
    acc += ControllerWeights::entry(Tv, i - 1) * d * d;
  }
  return acc;
}

std::vector<int> capacitor_buses(const NetworkModel& m) {
  std::vector<int> out;
  for (int i = 1; i < m.num_buses(); ++i)
    if (m.buses[i].has_capacitor) out.push_back(i);
  return out;
}

struct BusDevice {
  int battery = -1;
  double p_min = 0.0;
  double e_max = 0.0;
};

BusDevice device_at(const NetworkModel& m, int bus) {
  BusDevice d;
  d.battery = m.battery_at(bus);
  if (d.battery >= 0) {
    d.p_min = m.batteries[d.battery].p_min;
    d.e_max = m.batteries[d.battery].e_max;
  }
  return d;
}

double ref_soc(const ReferenceTrajectory& r, const BusDevice& d, int step) {
  return d.battery >= 0 ? r.battery_soc(step, d.battery) : 0.0;
}

double ref_power(const ReferenceTrajectory& r, const BusDevice& d, int step) {
  return d.battery >= 0 ? r.battery_power(step, d.battery) : 0.0;
}

// buses that need terminal rows: every battery bus and every bus hosting a flexible load
std::vector<int> terminal_buses(const NetworkModel& m, const Fleet& fleet) {
  std::vector<char> need(m.num_buses(), 0);
  for (const auto& b : m.batteries) need[b.bus] = 1;
  for (const auto& l : fleet.shapeable()) need.at(l.bus) = 1;
  for (const auto& l : fleet.deferrable()) need.at(l.bus) = 1;
  std::vector<int> out;
  for (int i = 1; i < m.num_buses(); ++i)
    if (need[i]) out.push_back(i);
  return out;
}

double deferrable_power_at(const Fleet& fleet, int bus, int step) {
  double acc = 0.0;
  for (const auto& l : fleet.deferrable())
    if (l.bus == bus) acc += l.power_at(step);
  return acc;
}

}  // namespace

ReferenceTrajectory solve_stage1(const NetworkModel& model, const RadialTopology& topo, const ControllerConfig& config) {
  config.horizon.validate();
  const auto caps = capacitor_buses(model);
  const int nbat = static_cast<int>(model.batteries.size());
  config.weights.validate(static_cast<int>(caps.size()) + nbat, model.num_buses() - 1);
  const int Nr = config.horizon.N_r;
  const double nu_nom = config.nominal(model);

  FlowProgram fp(model, topo, Fleet{}, 0, Nr, config.horizon.dt);
  const std::vector<std::vector<double>> zeros(Nr, std::vector<double>(model.num_buses(), 0.0));
  assemble_feasible_set(fp, zeros, {.wrap_forecast = true, .envelope_at_start = true});
  assemble_dynamics(fp);
  for (int b = 0; b < nbat; ++b) {
    LinExpr per = fp.var(Quantity::ebat, b, Nr);
    per.add(fp.col(Quantity::ebat, b, 0), -1.0);
    fp.program().add_equality(per, "periodic:" + model.batteries[b].id);
  }
  for (int t = 0; t < Nr; ++t) {
    std::vector<std::pair<double, LinExpr>> controls;
    int c = 0;
    for (int i : caps) controls.emplace_back(ControllerWeights::entry(config.weights.T1, c++), fp.var(Quantity::qg, i, t));
    for (int b = 0; b < nbat; ++b)
      controls.emplace_back(ControllerWeights::entry(config.weights.T1, c++), fp.var(Quantity::pbat, b, t));
    add_step_cost(fp, t, config.weights.T2, nu_nom, config.loss_weight, std::move(controls));
  }

  ReferenceTrajectory ref;
  ref.period = Nr;
  ref.report = solve(fp.program(), config.solver);
  if (!ref.report.optimal())
    throw ConfigError(std::string("base network violates the feasibility assumption (stage-1 ") +
                      to_string(ref.report.status) + ")");
  const auto& x = ref.report.primal;
  ref.objective = ref.report.objective;
  ref.flows = fp.flows(x);
  ref.relaxation_gap = relaxation_gap(model, topo, ref.flows);
  ref.report.max_relaxation_gap = ref.relaxation_gap;
  ref.e_bat.assign(Nr + 1, std::vector<double>(nbat));
  ref.p_bat.assign(Nr, std::vector<double>(nbat));
  ref.q_g.assign(Nr, std::vector<double>(model.num_buses(), 0.0));
  // clip into the device boxes so downstream rows built from the reference
  // are not infeasible by solver round-off
  for (int t = 0; t <= Nr; ++t) {
    for (int b = 0; b < nbat; ++b) {
      const auto& bat = model.batteries[b];
      ref.e_bat[t][b] = std::clamp(x[fp.col(Quantity::ebat, b, t)], bat.e_low, bat.e_max);
      if (t < Nr) ref.p_bat[t][b] = std::clamp(x[fp.col(Quantity::pbat, b, t)], bat.p_min, bat.p_max);
    }
    if (t < Nr)
      for (int i : caps)
        ref.q_g[t][i] = std::clamp(x[fp.col(Quantity::qg, i, t)], model.buses[i].q_min, model.buses[i].q_max);
  }
  return ref;
}

double AffineInSoc::eval(const std::vector<double>& e) const {
  double acc = constant;
  for (auto [j, c] : coef) acc += c * e.at(j);
  return acc;
}

TerminalSet build_terminal_set(const NetworkModel& model, const ReferenceTrajectory& reference, const Fleet& fleet,
                               int k, const HorizonConfig& horizon) {
  TerminalSet ts;
  const int s = k + horizon.N;
  const double dt = horizon.dt;
  ts.step = s;
  ts.k_out_max = fleet.k_out_max();
  const auto& shp = fleet.shapeable();
  for (int j = 0; j < static_cast<int>(shp.size()); ++j) {
    const auto& l = shp[j];
    const double lower = std::max(l.e_des - std::max(0.0, (l.k_out - s) * l.eta * dt * l.c_max), l.e_low);
    ts.shapeable.push_back({j, lower, l.e_des});
    if (lower > l.e_des + 1e-12) {
      ts.empty = true;
      ts.reason = "load '" + l.id + "' has e_low above e_des";
    }
  }
  for (int bus : terminal_buses(model, fleet)) {
    const BusDevice dev = device_at(model, bus);
    BusTerminal bt{bus, dev.battery, {}};
    bt.target.constant = ref_soc(reference, dev, s);
    if (ts.k_out_max)
      for (int l = s; l <= *ts.k_out_max; ++l) bt.target.constant += dt * deferrable_power_at(fleet, bus, l);
    double best = bt.target.constant;  // smallest target, reached with every load at e_des
    for (int j = 0; j < static_cast<int>(shp.size()); ++j) {
      if (shp[j].bus != bus || shp[j].k_out <= s) continue;
      bt.target.constant += shp[j].e_des / shp[j].eta;
      bt.target.coef.emplace_back(j, -1.0 / shp[j].eta);
    }
    const double cap = dev.battery >= 0 ? dev.e_max : 0.0;
    if (best > cap + 1e-9 && !ts.empty) {
      ts.empty = true;
      std::ostringstream os;
      os << "bus " << bus << " cannot store the remaining deferrable energy (" << best << " > " << cap << ")";
      ts.reason = os.str();
    }
    ts.buses.push_back(std::move(bt));
  }
  return ts;
}

std::vector<LemmaRow> lemma1_rows(const NetworkModel& model, const ReferenceTrajectory& reference, const Fleet& fleet,
                                  int k, const HorizonConfig& horizon) {
  std::vector<LemmaRow> rows;
  const auto kmax = fleet.k_out_max();
  const int s = k + horizon.N;
  if (!kmax || *kmax < s) return rows;
  const double dt = horizon.dt;
  const auto& shp = fleet.shapeable();
  std::vector<int> flexible(model.num_buses(), 0);
  for (const auto& l : shp) flexible[l.bus] = 1;
  for (const auto& l : fleet.deferrable()) flexible[l.bus] = 1;

  for (int bus = 1; bus < model.num_buses(); ++bus) {
    if (!flexible[bus]) continue;
    const BusDevice dev = device_at(model, bus);
    // suffix sums of deferrable energy from l to kmax
    std::vector<double> def_tail(*kmax - s + 2, 0.0);
    for (int l = *kmax; l >= s; --l) def_tail[l - s] = def_tail[l - s + 1] + dt * deferrable_power_at(fleet, bus, l);

    for (int l = s; l <= *kmax; ++l) {
      LemmaRow power{bus, l, 1, {}};
      power.margin.constant = ref_power(reference, dev, l) - dev.p_min - deferrable_power_at(fleet, bus, l);
      LemmaRow energy{bus, l, 2, {}};
      energy.margin.constant = dev.e_max - ref_soc(reference, dev, l) - def_tail[l - s];
      for (int j = 0; j < static_cast<int>(shp.size()); ++j) {
        const auto& ld = shp[j];
        if (ld.bus != bus || ld.k_out <= s) continue;
        const double span = ld.k_out - s;
        if (l < ld.k_out) {
          const double rate = 1.0 / (span * ld.eta * dt);  // tail power per unit of missing energy
          power.margin.constant -= ld.e_des * rate;
          power.margin.coef.emplace_back(j, rate);
        }
        const double share = std::max(0, ld.k_out - l) / (ld.eta * span);
        if (share > 0.0) {
          energy.margin.constant -= ld.e_des * share;
          energy.margin.coef.emplace_back(j, share);
        }
      }
      rows.push_back(std::move(power));
      rows.push_back(std::move(energy));
    }
  }
  return rows;
}

std::vector<Lemma1Entry> Lemma1Report::violations(double tol) const {
  std::vector<Lemma1Entry> out;
  for (const auto& e : entries)
    if (e.margin < -tol) out.push_back(e);
  return out;
}

Lemma1Report check_lemma1_conditions(const NetworkModel& model, const ReferenceTrajectory& reference,
                                     const Fleet& fleet, const std::vector<double>& e_terminal, int k,
                                     const HorizonConfig& horizon) {
  if (static_cast<int>(e_terminal.size()) != fleet.num_shapeable())
    throw std::invalid_argument("one terminal SOC per shapeable load expected");
  const int s = k + horizon.N;
  for (int j = 0; j < fleet.num_shapeable(); ++j) {
    const auto& l = fleet.shapeable()[j];
    if (l.k_out == s && e_terminal[j] < l.e_des - 1e-9)
      throw DegenerateTailError("load '" + l.id + "' leaves at step " + std::to_string(s) + " below its desired SOC");
  }
  Lemma1Report rep;
  for (const auto& row : lemma1_rows(model, reference, fleet, k, horizon)) {
    const double m = row.margin.eval(e_terminal);
    rep.entries.push_back({row.bus, row.step, row.family, m});
    rep.worst_margin = rep.entries.size() == 1 ? m : std::min(rep.worst_margin, m);
  }
  return rep;
}

namespace {

LinExpr affine_expr(const FlowProgram& fp, const AffineInSoc& a, int step) {
  LinExpr e(a.constant);
  for (auto [j, c] : a.coef) e.add(fp.col(Quantity::eshp, j, step), c);
  return e;
}

}  // namespace

Stage2Program build_stage2_program(const NetworkModel& model, const RadialTopology& topo, const Fleet& fleet,
                                   const ReferenceTrajectory& reference, const ControllerConfig& config,
                                   const std::vector<double>& battery_soc, int k) {
  const HorizonConfig& hz = config.horizon;
  hz.validate();
  const int N = hz.N, s = k + N;
  const int nbat = static_cast<int>(model.batteries.size());
  if (static_cast<int>(battery_soc.size()) != nbat) throw std::invalid_argument("one SOC per battery expected");

  Stage2Program sp{FlowProgram(model, topo, fleet, k, N, hz.dt), build_terminal_set(model, reference, fleet, k, hz),
                   {}};
  FlowProgram& fp = sp.flow;
  ConicProgram& prog = fp.program();

  std::vector<std::vector<double>> p_def(N);
  for (int t = k; t < s; ++t) p_def[t - k] = fleet.deferrable_power(t, model.num_buses());
  assemble_feasible_set(fp, p_def, {.wrap_forecast = true, .envelope_at_start = false, .envelope_at_end = false});
  assemble_dynamics(fp);
  for (int b = 0; b < nbat; ++b)
    prog.add_bounds(fp.col(Quantity::ebat, b, s), model.batteries[b].e_low, model.batteries[b].e_max);

  for (int j = 0; j < fleet.num_shapeable(); ++j)
    prog.add_equality(LinExpr(-fleet.shapeable()[j].e).add(fp.col(Quantity::eshp, j, k), 1.0),
                      "init:" + fleet.shapeable()[j].id);
  for (int b = 0; b < nbat; ++b)
    prog.add_equality(LinExpr(-battery_soc[b]).add(fp.col(Quantity::ebat, b, k), 1.0), "init:" + model.batteries[b].id);

  for (const auto& tb : sp.terminal.shapeable) prog.add_bounds(fp.col(Quantity::eshp, tb.load, s), tb.lower, tb.upper);

  std::vector<std::string> infeasible;
  // rows without any terminal SOC term are data; keep them out of the program
  auto constant_row = [&](const AffineInSoc& a, bool equality, const std::string& tag) {
    if (!a.coef.empty()) return false;
    const bool ok = equality ? std::abs(a.constant) <= 1e-9 : a.constant >= -1e-9;
    if (!ok) infeasible.push_back(tag);
    return true;
  };

  for (const auto& bt : sp.terminal.buses) {
    const std::string tag = "terminal:bus" + std::to_string(bt.bus);
    LinExpr row = affine_expr(fp, bt.target, s);
    if (bt.battery >= 0) {
      row.add(fp.col(Quantity::ebat, bt.battery, s), -1.0);
      prog.add_equality(row, tag);
    } else if (!constant_row(bt.target, true, tag)) {
      prog.add_equality(row, tag);
    }
  }

  if (config.embed_lemma_rows) {
    sp.lemma = lemma1_rows(model, reference, fleet, k, hz);
    for (const auto& r : sp.lemma) {
      const std::string tag =
          std::string(r.family == 1 ? "lemma-power:bus" : "lemma-energy:bus") + std::to_string(r.bus) + "@" +
          std::to_string(r.step);
      if (!constant_row(r.margin, false, tag)) prog.add_nonnegative(affine_expr(fp, r.margin, s), tag);
    }
  }
  if (!infeasible.empty() && !sp.terminal.empty) {
    sp.terminal.empty = true;
    sp.terminal.reason = "violated data row " + infeasible.front();
  }

  const double nu_nom = config.nominal(model);
  for (int t = k; t < s; ++t) {
    const double lam = config.price.at(t);
    for (int j = 0; j < fleet.num_shapeable(); ++j) prog.add_objective(fp.col(Quantity::cshp, j, t), lam);
    add_step_cost(fp, t, config.weights.T3, nu_nom, config.loss_weight, {});
  }
  return sp;
}

MpcSolution solve_stage2(const NetworkModel& model, const RadialTopology& topo, const Fleet& fleet,
                         const ReferenceTrajectory& reference, const ControllerConfig& config,
                         const std::vector<double>& battery_soc, int k) {
  const Stage2Program sp = build_stage2_program(model, topo, fleet, reference, config, battery_soc, k);
  const FlowProgram& fp = sp.flow;
  const int N = config.horizon.N;
  const int nbat = static_cast<int>(model.batteries.size());
  const int nshp = fleet.num_shapeable();

  MpcSolution sol;
  sol.step = k;
  sol.horizon = N;
  for (const auto& l : fleet.shapeable()) sol.shapeable_ids.push_back(l.id);
  if (sp.terminal.empty) {
    sol.report.status = SolveStatus::Infeasible;
    sol.report.message = "terminal set empty: " + sp.terminal.reason;
    return sol;
  }
  sol.report = solve(fp.program(), config.solver);
  if (!sol.report.optimal()) return sol;

  const auto& x = sol.report.primal;
  sol.objective = sol.report.objective;
  sol.flows = fp.flows(x);
  sol.relaxation_gap = relaxation_gap(model, topo, sol.flows);
  sol.report.max_relaxation_gap = sol.relaxation_gap;
  for (int i = 0; i <= N; ++i) {
    const int t = k + i;
    std::vector<double> es(nshp), eb(nbat);
    for (int j = 0; j < nshp; ++j) es[j] = x[fp.col(Quantity::eshp, j, t)];
    for (int b = 0; b < nbat; ++b) eb[b] = x[fp.col(Quantity::ebat, b, t)];
    sol.e_shp.push_back(std::move(es));
    sol.e_bat.push_back(std::move(eb));
    if (i == N) break;
    std::vector<double> q(model.num_buses(), 0.0), c(nshp), p(nbat);
    for (int bus = 1; bus < model.num_buses(); ++bus)
      if (model.buses[bus].has_capacitor) q[bus] = x[fp.col(Quantity::qg, bus, t)];
    double spend = 0.0;
    for (int j = 0; j < nshp; ++j) {
      c[j] = x[fp.col(Quantity::cshp, j, t)];
      spend += c[j];
    }
    for (int b = 0; b < nbat; ++b) p[b] = x[fp.col(Quantity::pbat, b, t)];
    sol.price_cost += config.price.at(t) * spend;
    sol.q_g.push_back(std::move(q));
    sol.c_shp.push_back(std::move(c));
    sol.p_bat.push_back(std::move(p));
  }
  return sol;
}

ShiftedCandidate construct_shifted_candidate(const NetworkModel& model, const MpcSolution& previous,
                                             const ReferenceTrajectory& reference, const Fleet& fleet,
                                             const HorizonConfig& horizon) {
  if (!previous.optimal()) throw std::invalid_argument("shifted candidate needs a feasible previous solution");
  const int N = previous.horizon;
  const int k = previous.step;
  const int s = k + N;
  const double dt = horizon.dt;
  const int nbat = static_cast<int>(model.batteries.size());

  std::map<std::string, int> prev_pos;
  for (int j = 0; j < static_cast<int>(previous.shapeable_ids.size()); ++j) prev_pos[previous.shapeable_ids[j]] = j;
  std::vector<int> from(fleet.num_shapeable());
  for (int j = 0; j < fleet.num_shapeable(); ++j) {
    auto it = prev_pos.find(fleet.shapeable()[j].id);
    if (it == prev_pos.end())
      throw std::invalid_argument("load '" + fleet.shapeable()[j].id + "' was not part of the previous solution");
    from[j] = it->second;
  }

  ShiftedCandidate c;
  c.step = k + 1;
  for (const auto& l : fleet.shapeable()) c.shapeable_ids.push_back(l.id);
  auto pick = [&](const std::vector<double>& row) {
    std::vector<double> out(from.size());
    for (std::size_t j = 0; j < from.size(); ++j) out[j] = row[from[j]];
    return out;
  };
  for (int i = 1; i < N; ++i) {
    c.q_g.push_back(previous.q_g[i]);
    c.c_shp.push_back(pick(previous.c_shp[i]));
    c.p_bat.push_back(previous.p_bat[i]);
    c.flows.steps.push_back(previous.flows.steps[i]);
  }
  for (int i = 1; i <= N; ++i) {
    c.e_shp.push_back(pick(previous.e_shp[i]));
    c.e_bat.push_back(previous.e_bat[i]);
  }

  // appended step at N + k: constant-rate tails, reference capacitors, and the
  // battery absorbing the difference to the reference injection
  const auto& e_term = c.e_shp.back();
  std::vector<double> tail(fleet.num_shapeable(), 0.0);
  std::vector<double> tail_bus(model.num_buses(), 0.0);
  for (int j = 0; j < fleet.num_shapeable(); ++j) {
    const auto& l = fleet.shapeable()[j];
    if (l.k_out > s) {
      tail[j] = (l.e_des - e_term[j]) / ((l.k_out - s) * l.eta * dt);
    } else if (e_term[j] < l.e_des - 1e-9) {
      throw DegenerateTailError("load '" + l.id + "' leaves at step " + std::to_string(l.k_out) +
                                " below its desired SOC");
    }
    tail_bus[l.bus] += tail[j];
  }
  std::vector<double> q(model.num_buses(), 0.0);
  for (int bus = 1; bus < model.num_buses(); ++bus) q[bus] = reference.capacitor(s, bus);
  std::vector<double> p(nbat);
  for (int b = 0; b < nbat; ++b) {
    const int bus = model.batteries[b].bus;
    p[b] = reference.battery_power(s, b) - deferrable_power_at(fleet, bus, s) - tail_bus[bus];
  }
  c.q_g.push_back(q);
  c.c_shp.push_back(tail);
  c.p_bat.push_back(p);
  c.flows.steps.push_back(reference.flow(s));

  std::vector<double> es(fleet.num_shapeable()), eb(nbat);
  for (int j = 0; j < fleet.num_shapeable(); ++j) es[j] = e_term[j] + fleet.shapeable()[j].eta * dt * tail[j];
  for (int b = 0; b < nbat; ++b) eb[b] = c.e_bat.back()[b] + model.batteries[b].eta * dt * p[b];
  c.e_shp.push_back(es);
  c.e_bat.push_back(eb);
  return c;
}

std::pair<double, std::string> candidate_residual(const Stage2Program& sp, const ShiftedCandidate& c,
                                                  const ControllerConfig& config) {
  const FlowProgram& fp = sp.flow;
  const NetworkModel& m = fp.model();
  if (fp.start() != c.step) throw std::invalid_argument("candidate and program start at different steps");
  if (fp.fleet().num_shapeable() != static_cast<int>(c.shapeable_ids.size()))
    throw std::invalid_argument("candidate and program have different fleets");
  std::vector<double> x(fp.program().num_vars(), 0.0);
  const int N = fp.horizon();
  const double nu_nom = config.nominal(m);
  for (int i = 0; i <= N; ++i) {
    const int t = fp.start() + i;
    for (std::size_t j = 0; j < c.shapeable_ids.size(); ++j) x[fp.col(Quantity::eshp, j, t)] = c.e_shp[i][j];
    for (std::size_t b = 0; b < m.batteries.size(); ++b) x[fp.col(Quantity::ebat, b, t)] = c.e_bat[i][b];
    if (i == N) break;
    const FlowStep& f = c.flows.steps[i];
    for (int k = 0; k < m.num_lines(); ++k) {
      x[fp.col(Quantity::P, k, t)] = f.P[k];
      x[fp.col(Quantity::Q, k, t)] = f.Q[k];
      x[fp.col(Quantity::l, k, t)] = f.l[k];
    }
    for (int bus = 1; bus < m.num_buses(); ++bus) {
      x[fp.col(Quantity::nu, bus, t)] = f.nu[bus];
      if (m.buses[bus].has_capacitor) x[fp.col(Quantity::qg, bus, t)] = c.q_g[i][bus];
    }
    for (std::size_t j = 0; j < c.shapeable_ids.size(); ++j) x[fp.col(Quantity::cshp, j, t)] = c.c_shp[i][j];
    for (std::size_t b = 0; b < m.batteries.size(); ++b) x[fp.col(Quantity::pbat, b, t)] = c.p_bat[i][b];
    x[fp.col(Quantity::epigraph, 0, t)] = step_cost_value(m, config.weights.T3, nu_nom, f);
  }
  return fp.program().worst_violation(x);
}

}  // namespace gridshaper
