// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include "fixtures.hpp"

#include "gridshaper/controller.hpp"
#include "gridshaper/formulation.hpp"
#include "gridshaper/io.hpp"
#include "gridshaper/pnp.hpp"
#include "gridshaper/scenario.hpp"
#include "gridshaper/simulator.hpp"
#include "gridshaper/socp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace gridshaper;
namespace fs = std::filesystem;

namespace {

const std::string kData = GRIDSHAPER_DATA_DIR;

struct Run {
  NetworkModel model;
  Scenario scenario;
  ControllerConfig config;
  SimulationTrace trace;
  Metrics metrics;
  double seconds = 0.0;
};

Run run_file(const std::string& scenario_path, const SimulationOptions& opts) {
  Run r;
  const Scenario raw = load_scenario(scenario_path);
  r.model = load_network(raw.network_file);
  r.scenario = load_scenario(scenario_path, r.model.base);
  r.config = load_config(raw.config_file);
  const auto t0 = std::chrono::steady_clock::now();
  r.trace = run_simulation(r.model, r.scenario, r.config, opts);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.metrics = compute_metrics(r.model, r.trace, uncontrolled_baseline(r.model, r.scenario, r.config.horizon.dt));
  return r;
}

int failures = 0;
std::map<int, std::string> lines;  // printed in criterion order at the end

void report(int n, bool pass, const std::string& detail) {
  char head[32];
  std::snprintf(head, sizeof head, "criterion %2d: %s  ", n, pass ? "PASS" : "FAIL");
  lines[n] = head + detail;
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// gaps from every optimal solve of a run: the reference and each stage-2 step
double worst_gap(const SimulationTrace& t) {
  double g = t.reference.relaxation_gap;
  for (const auto& s : t.steps) g = std::max(g, s.relaxation_gap);
  return g;
}

struct Satisfaction {
  int shapeable = 0, deferrable = 0, bad = 0;
  double worst_shortfall = 0.0;
};

void tally(const SimulationTrace& t, Satisfaction& s) {
  for (const auto& o : t.shapeable_outcomes) {
    ++s.shapeable;
    // loads still connected at the end have no deadline inside the run
    if (!o.left && o.k_out >= t.total_steps) continue;
    const double short_by = o.e_des - o.e_final;
    s.worst_shortfall = std::max(s.worst_shortfall, short_by);
    if (!o.left || short_by > 1e-6) ++s.bad;
  }
  for (const auto& o : t.deferrable_outcomes) {
    ++s.deferrable;
    if (!o.finished || std::abs(o.energy_delivered - o.energy_required) > 1e-6) ++s.bad;
  }
}

struct DelayCheck {
  int accepted = 0, delayed = 0, unconfirmed = 0;
};

void tally(const SimulationTrace& t, DelayCheck& c) {
  for (const auto& d : t.decisions) {
    if (d.kind != RequestKind::Deferrable || !d.accepted) continue;
    ++c.accepted;
    if (d.delay > 0) ++c.delayed;
    if (!d.min_delay_confirmed || !*d.min_delay_confirmed) ++c.unconfirmed;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  SimulationOptions full;
  full.check_candidates = true;
  full.verify_min_delay = true;

  // criteria 1, 2, 5 share the replicated schedule run
  const Run schedule = run_file(kData + "/scenarios/daytime_mix.json", full);
  double max_gap = worst_gap(schedule.trace);
  Satisfaction sat;
  DelayCheck delays;
  tally(schedule.trace, sat);
  tally(schedule.trace, delays);

  {
    const double lo = schedule.model.nu_min - 1e-6, hi = schedule.model.nu_max + 1e-6;
    double vmin = 1e9, vmax = -1e9;
    for (const auto& s : schedule.trace.steps)
      for (int i = 0; i < schedule.model.num_buses(); ++i) {
        vmin = std::min(vmin, s.flow.nu[i]);
        vmax = std::max(vmax, s.flow.nu[i]);
      }
    const bool ok = !schedule.trace.failure && static_cast<int>(schedule.trace.steps.size()) == schedule.scenario.total_steps &&
                    vmin >= lo && vmax <= hi && schedule.seconds <= 120.0;
    report(1, ok, fmt("nu in [%.6f, %.6f], %.1f s", vmin, vmax, schedule.seconds) +
                      (schedule.trace.failure ? " run failed: " + *schedule.trace.failure : std::string()));
  }

  // evening peak run, reused by criterion 8
  const Run evening = run_file(kData + "/scenarios/evening_peak.json", full);
  tally(evening.trace, sat);
  tally(evening.trace, delays);
  max_gap = std::max(max_gap, worst_gap(evening.trace));

  // criterion 3: random request streams on the small feeder
  int infeasible = 0, numerical = 0, runs_failed = 0, rejected = 0, admitted = 0;
  double worst_residual = 0.0;
  {
    const NetworkModel model = load_network(kData + "/feeders/feeder6.json");
    const ControllerConfig config = load_config(kData + "/config/default.json");
    GeneratorParams g;
    g.dt = config.horizon.dt;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const Scenario sc = generate_scenario(seed, model, g);
      const auto trace = run_simulation(model, sc, config, full);
      const auto m = compute_metrics(model, trace, uncontrolled_baseline(model, sc, g.dt));
      infeasible += m.stage2_infeasible;
      numerical += m.stage2_numerical_failures;
      runs_failed += trace.failure ? 1 : 0;
      rejected += m.rejected;
      admitted += m.accepted;
      worst_residual = std::max(worst_residual, m.max_candidate_residual);
      max_gap = std::max(max_gap, worst_gap(trace));
      tally(trace, sat);
      tally(trace, delays);
    }
    report(3, infeasible == 0 && runs_failed == 0,
           std::to_string(infeasible) + " infeasible stage-2 steps over 100 scenarios (" + std::to_string(admitted) +
               " admitted, " + std::to_string(rejected) + " rejected, " + std::to_string(numerical) +
               " numerical failures" +
               fmt(", max candidate residual %.2e)", worst_residual));
  }

  report(2, sat.bad == 0,
         std::to_string(sat.shapeable) + " shapeable and " + std::to_string(sat.deferrable) +
             " deferrable loads checked, " + std::to_string(sat.bad) + " unsatisfied" +
             fmt(", worst shortfall %.2e", sat.worst_shortfall));

  // criterion 4: every accepted deferrable above, plus a congested case with a forced delay
  {
    const NetworkModel m = fixtures::squeezed_feeder();
    const RadialTopology topo = RadialTopology::build(m);
    ControllerConfig cfg;
    cfg.horizon = {1.0, 4, 8};
    cfg.price = PriceSignal::time_of_use(1.0, 8);
    const ReferenceTrajectory ref = solve_stage1(m, topo, cfg);
    const ControllerContext ctx{m, topo, cfg, ref};
    PlugRequest req;
    req.kind = RequestKind::Deferrable;
    req.step = 0;
    req.deferrable.id = "dryer";
    req.deferrable.bus = 2;
    req.deferrable.profile = {0.1};
    req.deferrable.request_step = 0;
    req.deferrable.d_max = 3;
    const SystemState state{0, Fleet{}, {}};
    const auto d = admit_deferrable(req, state, ctx);
    const auto all = enumerate_delays(req, state, ctx);
    bool forced_ok = d.accepted && d.delay > 0 && all.at(d.delay).status == SolveStatus::Optimal;
    for (int k = 0; forced_ok && k < d.delay; ++k) forced_ok = all[k].status == SolveStatus::Infeasible;
    report(4, delays.unconfirmed == 0 && forced_ok,
           std::to_string(delays.accepted) + " accepted deferrables (" + std::to_string(delays.delayed) +
               " delayed), " + std::to_string(delays.unconfirmed) + " not confirmed minimal; congested case d* = " +
               std::to_string(d.delay));
  }

  {
    double worst = 0.0;
    int checked = 0;
    for (const auto& s : schedule.trace.steps)
      if (s.candidate_residual) {
        worst = std::max(worst, *s.candidate_residual);
        ++checked;
      }
    // the first step has no predecessor
    const bool ok = checked >= static_cast<int>(schedule.trace.steps.size()) - 1 && worst <= 1e-6;
    report(5, ok, fmt("max residual %.2e over %.0f steps", worst, checked));
  }

  report(6, max_gap <= 1e-5, fmt("max relative gap %.2e over criteria 1-5 solves", max_gap));

  {
    std::mt19937 rng(2024);
    double worst = 0.0;
    bool solved = true;
    for (int trial = 0; trial < 20; ++trial) {
      const auto m = fixtures::random_tree(rng, 1 + trial % 9);
      const auto topo = RadialTopology::build(m);
      FlowProgram fp(m, topo, Fleet{}, 0, 1, 0.5);
      assemble_feasible_set(fp, std::vector<std::vector<double>>(1, std::vector<double>(m.num_buses(), 0.0)));
      for (int k = 0; k < m.num_lines(); ++k) fp.program().add_objective(fp.col(Quantity::l, k, 0), m.lines[k].r);
      const auto rep = solve(fp.program());
      if (!rep.optimal()) {
        solved = false;
        continue;
      }
      std::vector<double> p(m.num_buses(), 0.0), q(m.num_buses(), 0.0);
      for (int i = 1; i < m.num_buses(); ++i) {
        p[i] = m.forecast.p_at(0, i);
        q[i] = m.forecast.q_at(0, i);
      }
      const auto oracle = solve_exact_distflow(m, p, q);
      const auto flows = fp.flows(rep.primal);
      for (int i = 0; i < m.num_buses(); ++i) worst = std::max(worst, std::abs(flows.steps[0].nu[i] - oracle.nu[i]));
    }
    report(7, solved && worst <= 1e-6, fmt("max |nu - sweep| %.2e over 20 feeders", worst));
  }

  {
    const double r1 = schedule.metrics.peak_controlled / schedule.metrics.peak_baseline;
    const double r2 = evening.metrics.peak_controlled / evening.metrics.peak_baseline;
    report(8, r1 < 1.0 && r2 <= 0.85 && !evening.trace.failure,
           fmt("controlled/baseline peak %.3f on the replicated schedule, %.3f on the evening peak", r1, r2));
  }

  {
    double worst = 0.0;
    for (const char* feeder : {"feeder12.json", "feeder6.json"}) {
      const NetworkModel m = load_network(kData + "/feeders/" + feeder);
      const ControllerConfig cfg = load_config(kData + "/config/default.json");
      const auto ref = solve_stage1(m, RadialTopology::build(m), cfg);
      for (std::size_t b = 0; b < m.batteries.size(); ++b)
        worst = std::max(worst, std::abs(ref.e_bat[ref.period][b] - ref.e_bat[0][b]));
    }
    report(9, worst <= 1e-7, fmt("max |e(N_r) - e(0)| %.2e", worst));
  }

  {
    const fs::path root = fs::temp_directory_path() / ("gridshaper_accept_" + std::to_string(::getpid()));
    const fs::path a = root / "a", b = root / "b";
    export_trace(schedule.model, schedule.trace, schedule.metrics, a.string());
    const Run again = run_file(kData + "/scenarios/daytime_mix.json", full);
    export_trace(again.model, again.trace, again.metrics, b.string());
    int files = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      if (!fs::exists(b / e.path().filename()) || slurp(e.path()) != slurp(b / e.path().filename())) ++differ;
    }
    fs::remove_all(root);
    report(10, files >= 5 && differ == 0,
           std::to_string(files) + " CSV files compared, " + std::to_string(differ) + " differ");
  }

  for (const auto& [n, line] : lines) std::printf("%s\n", line.c_str());
  return failures == 0 ? 0 : 1;
}
