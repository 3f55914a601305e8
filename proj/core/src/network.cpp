#include "gridshaper/network.hpp"

#include "gridshaper/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace gridshaper {

namespace {

int wrap(int step, int period) {
  const int m = step % period;
  return m < 0 ? m + period : m;
}

}  // namespace

double FixedLoadForecast::p_at(int step, int bus) const {
  if (bus == 0 || p.empty()) return 0.0;
  return p[wrap(step, length())].at(bus - 1);
}

double FixedLoadForecast::q_at(int step, int bus) const {
  if (bus == 0 || q.empty()) return 0.0;
  return q[wrap(step, static_cast<int>(q.size()))].at(bus - 1);
}

int NetworkModel::battery_at(int bus) const {
  for (std::size_t b = 0; b < batteries.size(); ++b)
    if (batteries[b].bus == bus) return static_cast<int>(b);
  return -1;
}

std::vector<std::string> validate_topology(const NetworkModel& model) {
  std::vector<std::string> out;
  auto report = [&](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };

  const int nb = model.num_buses();
  if (nb < 2) report("network needs the substation and at least one load bus");
  for (int i = 0; i < nb; ++i) {
    const Bus& b = model.buses[i];
    if (b.id != i) report("bus at position ", i, " has id ", b.id, "; ids must be 0..n in order");
    if (b.has_capacitor && b.q_min > b.q_max) report("bus ", i, ": q_min ", b.q_min, " > q_max ", b.q_max);
    if (b.battery >= static_cast<int>(model.batteries.size())) report("bus ", i, " references unknown battery");
    else if (b.battery >= 0 && model.batteries[b.battery].bus != i)
      report("bus ", i, " references battery '", model.batteries[b.battery].id, "' placed elsewhere");
  }
  if (nb > 0 && (model.buses[0].has_capacitor || model.buses[0].battery >= 0))
    report("substation bus 0 cannot host devices");

  std::vector<int> batteries_per_bus(std::max(nb, 0), 0);
  for (const auto& bat : model.batteries) {
    if (bat.bus <= 0 || bat.bus >= nb) {
      report("battery '", bat.id, "' on invalid bus ", bat.bus);
      continue;
    }
    if (++batteries_per_bus[bat.bus] > 1) report("bus ", bat.bus, " hosts more than one battery bank");
    if (bat.e_low > bat.e_max) report("battery '", bat.id, "': e_low > e_max");
    if (bat.p_min > bat.p_max) report("battery '", bat.id, "': p_min > p_max");
  }

  if (!(model.nu_min <= model.nu0 && model.nu0 <= model.nu_max))
    report("substation voltage squared ", model.nu0, " outside [", model.nu_min, ", ", model.nu_max, "]");
  if (model.nu_min <= 0.0) report("nu_min must be positive");

  bool lines_ok = true;
  for (std::size_t k = 0; k < model.lines.size(); ++k) {
    const Line& ln = model.lines[k];
    if (ln.from_bus < 0 || ln.from_bus >= nb || ln.to_bus < 0 || ln.to_bus >= nb) {
      report("line ", k, " references unknown bus");
      lines_ok = false;
      continue;
    }
    if (ln.from_bus == ln.to_bus) {
      report("line ", k, " is a self-loop at bus ", ln.from_bus);
      lines_ok = false;
    }
    if (ln.r < 0.0 || ln.x < 0.0) report("line ", k, " (", ln.from_bus, "-", ln.to_bus, ") has negative impedance");
  }
  if (lines_ok && nb > 0) {
    // union-find for cycles, then reachability from bus 0
    std::vector<int> parent(nb);
    for (int i = 0; i < nb; ++i) parent[i] = i;
    auto find = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (const Line& ln : model.lines) {
      const int a = find(ln.from_bus), b = find(ln.to_bus);
      if (a == b) report("cycle through line ", ln.from_bus, "-", ln.to_bus);
      else parent[a] = b;
    }
    for (int i = 1; i < nb; ++i)
      if (find(i) != find(0)) report("bus ", i, " is not reachable from the substation");
    if (model.num_lines() != nb - 1)
      report("expected ", nb - 1, " lines for ", nb - 1, " load buses, found ", model.num_lines());
  }

  const auto& fc = model.forecast;
  if (fc.p.size() != fc.q.size()) report("forecast p and q lengths differ");
  for (const auto* rows : {&fc.p, &fc.q}) {
    for (std::size_t t = 0; t < rows->size(); ++t) {
      if (static_cast<int>((*rows)[t].size()) != nb - 1) {
        report("forecast row ", t, " has width ", (*rows)[t].size(), ", expected ", nb - 1);
        break;
      }
      if (!std::all_of((*rows)[t].begin(), (*rows)[t].end(), [](double v) { return std::isfinite(v); })) {
        report("forecast row ", t, " has non-finite entries");
        break;
      }
    }
  }
  return out;
}

RadialTopology RadialTopology::build(const NetworkModel& model) {
  const auto issues = validate_topology(model);
  if (!issues.empty()) {
    std::string msg = "invalid network:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw ConfigError(msg);
  }
  const int nb = model.num_buses();
  const int nl = model.num_lines();
  RadialTopology t;
  t.upstream.assign(nl, -1);
  t.downstream.assign(nl, -1);
  t.parent_line.assign(nb, -1);
  t.child_lines.assign(nb, {});
  std::vector<std::vector<int>> incident(nb);
  for (int k = 0; k < nl; ++k) {
    incident[model.lines[k].from_bus].push_back(k);
    incident[model.lines[k].to_bus].push_back(k);
  }
  std::vector<char> seen(nb, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    t.order.push_back(i);
    for (int k : incident[i]) {
      const Line& ln = model.lines[k];
      const int j = ln.from_bus == i ? ln.to_bus : ln.from_bus;
      if (seen[j]) continue;
      seen[j] = 1;
      t.upstream[k] = i;
      t.downstream[k] = j;
      t.parent_line[j] = k;
      t.child_lines[i].push_back(k);
      queue.push_back(j);
    }
  }
  return t;
}

std::vector<int> downstream_lines(const NetworkModel& model, int bus) {
  if (bus < 0 || bus >= model.num_buses()) throw std::out_of_range("unknown bus " + std::to_string(bus));
  return RadialTopology::build(model).child_lines[bus];
}

double DistFlowResidual::max() const {
  return std::max({real_balance, reactive_balance, voltage_drop, current});
}

DistFlowResidual distflow_residual(const NetworkModel& model, const RadialTopology& topo, const FlowStep& f,
                                   const std::vector<double>& p, const std::vector<double>& q) {
  DistFlowResidual r;
  for (int k = 0; k < model.num_lines(); ++k) {
    const Line& ln = model.lines[k];
    const int i = topo.upstream[k], j = topo.downstream[k];
    double sumP = 0.0, sumQ = 0.0;
    for (int c : topo.child_lines[j]) {
      sumP += f.P[c];
      sumQ += f.Q[c];
    }
    r.real_balance = std::max(r.real_balance, std::abs(f.P[k] - p[j] - ln.r * f.l[k] - sumP));
    r.reactive_balance = std::max(r.reactive_balance, std::abs(f.Q[k] - q[j] - ln.x * f.l[k] - sumQ));
    const double drop = f.nu[i] - 2.0 * (ln.r * f.P[k] + ln.x * f.Q[k]) + (ln.r * ln.r + ln.x * ln.x) * f.l[k];
    r.voltage_drop = std::max(r.voltage_drop, std::abs(f.nu[j] - drop));
    r.current = std::max(r.current, std::abs(f.l[k] * f.nu[i] - f.P[k] * f.P[k] - f.Q[k] * f.Q[k]));
  }
  return r;
}

FlowStep solve_exact_distflow(const NetworkModel& model, const std::vector<double>& p, const std::vector<double>& q,
                              SweepOptions options) {
  const auto topo = RadialTopology::build(model);
  const int nb = model.num_buses(), nl = model.num_lines();
  if (static_cast<int>(p.size()) != nb || static_cast<int>(q.size()) != nb)
    throw std::invalid_argument("solve_exact_distflow: injections must have one entry per bus");

  FlowStep f{std::vector<double>(nl, 0.0), std::vector<double>(nl, 0.0), std::vector<double>(nl, 0.0),
             std::vector<double>(nb, model.nu0)};
  for (int it = 0; it < options.max_iterations; ++it) {
    // backward: line flows from the leaves up, losses from the previous pass
    for (auto pos = topo.order.rbegin(); pos != topo.order.rend(); ++pos) {
      const int j = *pos;
      const int k = topo.parent_line[j];
      if (k < 0) continue;
      double P = p[j] + model.lines[k].r * f.l[k];
      double Q = q[j] + model.lines[k].x * f.l[k];
      for (int c : topo.child_lines[j]) {
        P += f.P[c];
        Q += f.Q[c];
      }
      f.P[k] = P;
      f.Q[k] = Q;
    }
    // forward: voltages and currents from the root down
    double change = 0.0;
    for (int i : topo.order) {
      for (int k : topo.child_lines[i]) {
        const Line& ln = model.lines[k];
        const int j = topo.downstream[k];
        const double l = (f.P[k] * f.P[k] + f.Q[k] * f.Q[k]) / f.nu[i];
        const double nu = f.nu[i] - 2.0 * (ln.r * f.P[k] + ln.x * f.Q[k]) + (ln.r * ln.r + ln.x * ln.x) * l;
        if (!std::isfinite(nu) || nu <= 0.0)
          throw DivergenceError("power-flow sweep collapsed the voltage at bus " + std::to_string(j));
        change = std::max({change, std::abs(l - f.l[k]), std::abs(nu - f.nu[j])});
        f.l[k] = l;
        f.nu[j] = nu;
      }
    }
    if (change < options.tolerance && distflow_residual(model, topo, f, p, q).max() < 1e-10) return f;
  }
  throw DivergenceError("power-flow sweep did not converge in " + std::to_string(options.max_iterations) +
                        " iterations");
}

}  // namespace gridshaper
