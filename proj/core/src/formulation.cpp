#include "gridshaper/formulation.hpp"

#include "gridshaper/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gridshaper {

const char* to_string(Quantity q) {
  switch (q) {
    case Quantity::P: return "P";
    case Quantity::Q: return "Q";
    case Quantity::l: return "l";
    case Quantity::nu: return "nu";
    case Quantity::qg: return "qg";
    case Quantity::pbat: return "pbat";
    case Quantity::cshp: return "cshp";
    case Quantity::eshp: return "eshp";
    case Quantity::ebat: return "ebat";
    case Quantity::epigraph: return "epi";
  }
  return "?";
}

void VariableIndex::add(Quantity q, int element, int step, int column) {
  auto [it, inserted] = map_.emplace(std::make_tuple(static_cast<int>(q), element, step), column);
  if (!inserted) throw std::logic_error("variable index: duplicate key");
}

std::optional<int> VariableIndex::find(Quantity q, int element, int step) const {
  auto it = map_.find({static_cast<int>(q), element, step});
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

int VariableIndex::at(Quantity q, int element, int step) const {
  if (auto c = find(q, element, step)) return *c;
  throw std::out_of_range(std::string("variable index: no ") + to_string(q) + "[" + std::to_string(element) + "]@" +
                          std::to_string(step));
}

FlowProgram::FlowProgram(const NetworkModel& model, const RadialTopology& topo, Fleet fleet, int start, int horizon,
                         double dt)
    : model_(&model), topo_(&topo), fleet_(std::move(fleet)), start_(start), horizon_(horizon), dt_(dt) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("step length must be positive");
  auto make = [&](Quantity q, int element, int t) {
    const int c = program_.add_variable(std::string(to_string(q)) + "[" + std::to_string(element) + "]@" +
                                        std::to_string(t));
    index_.add(q, element, t, c);
  };
  const int nl = model.num_lines(), nb = model.num_buses();
  const int nbat = static_cast<int>(model.batteries.size()), nshp = fleet_.num_shapeable();
  for (int t = start; t <= start + horizon; ++t) {
    if (t < start + horizon) {
      for (int k = 0; k < nl; ++k) make(Quantity::P, k, t);
      for (int k = 0; k < nl; ++k) make(Quantity::Q, k, t);
      for (int k = 0; k < nl; ++k) make(Quantity::l, k, t);
      for (int i = 1; i < nb; ++i) make(Quantity::nu, i, t);
      for (int i = 1; i < nb; ++i)
        if (model.buses[i].has_capacitor) make(Quantity::qg, i, t);
      for (int b = 0; b < nbat; ++b) make(Quantity::pbat, b, t);
      for (int j = 0; j < nshp; ++j) make(Quantity::cshp, j, t);
    }
    for (int j = 0; j < nshp; ++j) make(Quantity::eshp, j, t);
    for (int b = 0; b < nbat; ++b) make(Quantity::ebat, b, t);
  }
}

LinExpr FlowProgram::nu(int bus, int step) const {
  if (bus == 0) return LinExpr(model_->nu0);
  return var(Quantity::nu, bus, step);
}

FlowSolution FlowProgram::flows(const std::vector<double>& x) const {
  FlowSolution out;
  const int nl = model_->num_lines(), nb = model_->num_buses();
  for (int t = start_; t < start_ + horizon_; ++t) {
    FlowStep s{std::vector<double>(nl), std::vector<double>(nl), std::vector<double>(nl), std::vector<double>(nb)};
    for (int k = 0; k < nl; ++k) {
      s.P[k] = x[col(Quantity::P, k, t)];
      s.Q[k] = x[col(Quantity::Q, k, t)];
      s.l[k] = x[col(Quantity::l, k, t)];
    }
    s.nu[0] = model_->nu0;
    for (int i = 1; i < nb; ++i) s.nu[i] = x[col(Quantity::nu, i, t)];
    out.steps.push_back(std::move(s));
  }
  return out;
}

AssemblyCounts assemble_feasible_set(FlowProgram& fp, const std::vector<std::vector<double>>& p_def,
                                     FeasibleSetOptions options) {
  const NetworkModel& m = fp.model();
  const RadialTopology& topo = fp.topology();
  const Fleet& fleet = fp.fleet();
  ConicProgram& prog = fp.program();
  const int nb = m.num_buses(), nl = m.num_lines();
  const int start = fp.start(), H = fp.horizon();
  if (static_cast<int>(p_def.size()) != H) throw std::invalid_argument("deferrable injections must cover the horizon");
  if (!options.wrap_forecast && start + H > m.forecast.length())
    throw ConfigError("fixed-load forecast covers " + std::to_string(m.forecast.length()) + " steps, horizon needs " +
                      std::to_string(start + H));

  // shapeable power per bus, as a list of fleet positions
  std::vector<std::vector<int>> shp_at(nb);
  for (int j = 0; j < fleet.num_shapeable(); ++j) shp_at.at(fleet.shapeable()[j].bus).push_back(j);

  const int before_orth = prog.num_orthant();
  AssemblyCounts counts;
  for (int t = start; t < start + H; ++t) {
    const auto& pd = p_def[t - start];
    if (static_cast<int>(pd.size()) != nb) throw std::invalid_argument("deferrable injections need one entry per bus");
    const std::string at = "@" + std::to_string(t);
    for (int k = 0; k < nl; ++k) {
      const Line& ln = m.lines[k];
      const int i = topo.upstream[k], j = topo.downstream[k];
      const std::string name = std::to_string(i) + "-" + std::to_string(j) + at;

      LinExpr pb = fp.var(Quantity::P, k, t);
      pb.add(fp.col(Quantity::l, k, t), -ln.r);
      for (int c : topo.child_lines[j]) pb.add(fp.col(Quantity::P, c, t), -1.0);
      if (int b = m.battery_at(j); b >= 0) pb.add(fp.col(Quantity::pbat, b, t), -1.0);
      for (int s : shp_at[j]) pb.add(fp.col(Quantity::cshp, s, t), -1.0);
      pb += -(m.forecast.p_at(t, j) + pd[j]);
      prog.add_equality(pb, "pbal:" + name);

      LinExpr qb = fp.var(Quantity::Q, k, t);
      qb.add(fp.col(Quantity::l, k, t), -ln.x);
      for (int c : topo.child_lines[j]) qb.add(fp.col(Quantity::Q, c, t), -1.0);
      if (m.buses[j].has_capacitor) qb.add(fp.col(Quantity::qg, j, t), 1.0);
      qb += -m.forecast.q_at(t, j);
      prog.add_equality(qb, "qbal:" + name);

      LinExpr vd = fp.nu(j, t);
      vd.add(fp.nu(i, t), -1.0);
      vd.add(fp.col(Quantity::P, k, t), 2.0 * ln.r);
      vd.add(fp.col(Quantity::Q, k, t), 2.0 * ln.x);
      vd.add(fp.col(Quantity::l, k, t), -(ln.r * ln.r + ln.x * ln.x));
      prog.add_equality(vd, "vdrop:" + name);
      counts.linear_rows += 3;

      prog.add_rotated_cone(fp.var(Quantity::l, k, t), fp.nu(i, t),
                            {fp.var(Quantity::P, k, t), fp.var(Quantity::Q, k, t)}, "current:" + name);
      ++counts.cone_blocks;
    }
    for (int i = 1; i < nb; ++i) {
      prog.add_bounds(fp.col(Quantity::nu, i, t), m.nu_min, m.nu_max);
      if (m.buses[i].has_capacitor) prog.add_bounds(fp.col(Quantity::qg, i, t), m.buses[i].q_min, m.buses[i].q_max);
    }
    for (int b = 0; b < static_cast<int>(m.batteries.size()); ++b)
      prog.add_bounds(fp.col(Quantity::pbat, b, t), m.batteries[b].p_min, m.batteries[b].p_max);
    for (int j = 0; j < fleet.num_shapeable(); ++j) {
      const auto& load = fleet.shapeable()[j];
      const bool connected = t >= load.k_in && t < load.k_out;
      prog.add_bounds(fp.col(Quantity::cshp, j, t), 0.0, connected ? load.c_max : 0.0);
    }
  }

  const int first_state = options.envelope_at_start ? start : start + 1;
  const int last_state = options.envelope_at_end ? start + H : start + H - 1;
  for (int t = first_state; t <= last_state; ++t) {
    for (int j = 0; j < fleet.num_shapeable(); ++j) {
      const auto& load = fleet.shapeable()[j];
      // power is pinned to zero from k_out on, so later states repeat e(k_out)
      if (t > load.k_out || (t == load.k_out && !options.envelope_at_end && load.k_out <= start + H)) continue;
      prog.add_bounds(fp.col(Quantity::eshp, j, t), shp_soc_min(load, t, fp.dt()), load.e_max);
    }
    for (int b = 0; b < static_cast<int>(m.batteries.size()); ++b)
      prog.add_bounds(fp.col(Quantity::ebat, b, t), m.batteries[b].e_low, m.batteries[b].e_max);
  }
  counts.bound_rows = prog.num_orthant() - before_orth;
  return counts;
}

int assemble_dynamics(FlowProgram& fp) {
  const NetworkModel& m = fp.model();
  ConicProgram& prog = fp.program();
  int rows = 0;
  for (int t = fp.start(); t < fp.start() + fp.horizon(); ++t) {
    for (int j = 0; j < fp.fleet().num_shapeable(); ++j) {
      const auto& load = fp.fleet().shapeable()[j];
      LinExpr e = fp.var(Quantity::eshp, j, t + 1);
      e.add(fp.col(Quantity::eshp, j, t), -1.0);
      e.add(fp.col(Quantity::cshp, j, t), -load.eta * fp.dt());
      prog.add_equality(e, "soc:" + load.id + "@" + std::to_string(t));
      ++rows;
    }
    for (int b = 0; b < static_cast<int>(m.batteries.size()); ++b) {
      LinExpr e = fp.var(Quantity::ebat, b, t + 1);
      e.add(fp.col(Quantity::ebat, b, t), -1.0);
      e.add(fp.col(Quantity::pbat, b, t), -m.batteries[b].eta * fp.dt());
      prog.add_equality(e, "soc:" + m.batteries[b].id + "@" + std::to_string(t));
      ++rows;
    }
  }
  return rows;
}

namespace {

double line_gap(const FlowStep& s, int k, double nu_up) {
  const double sq = s.P[k] * s.P[k] + s.Q[k] * s.Q[k];
  return std::abs(s.l[k] * nu_up - sq) / std::max(1.0, sq);
}

}  // namespace

double relaxation_gap(const NetworkModel& model, const RadialTopology& topo, const FlowStep& step) {
  double g = 0.0;
  for (int k = 0; k < model.num_lines(); ++k) g = std::max(g, line_gap(step, k, step.nu[topo.upstream[k]]));
  return g;
}

double relaxation_gap(const NetworkModel& model, const RadialTopology& topo, const FlowSolution& flows) {
  double g = 0.0;
  for (const auto& s : flows.steps) g = std::max(g, relaxation_gap(model, topo, s));
  return g;
}

GapReport check_relaxation_exactness(const NetworkModel& model, const FlowSolution& solution, double tol) {
  const auto topo = RadialTopology::build(model);
  GapReport rep;
  for (std::size_t t = 0; t < solution.steps.size(); ++t) {
    const auto& s = solution.steps[t];
    for (int k = 0; k < model.num_lines(); ++k) {
      const double g = line_gap(s, k, s.nu[topo.upstream[k]]);
      rep.max_gap = std::max(rep.max_gap, g);
      if (g > tol) rep.flagged.push_back({static_cast<int>(t), k, g});
    }
  }
  return rep;
}

}  // namespace gridshaper
