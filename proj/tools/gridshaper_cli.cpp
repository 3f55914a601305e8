#include "CLI11.hpp"

#include "gridshaper/controller.hpp"
#include "gridshaper/errors.hpp"
#include "gridshaper/formulation.hpp"
#include "gridshaper/io.hpp"
#include "gridshaper/network.hpp"
#include "gridshaper/scenario.hpp"
#include "gridshaper/simulator.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace gridshaper;

namespace {

struct Inputs {
  std::string network;
  std::string scenario;
  std::string config;
  std::string out;
  std::uint64_t seed = 7;
  int steps = 0;
};

// Flags win over the references stored in the scenario file.
struct Loaded {
  NetworkModel model;
  ControllerConfig config;
  std::optional<Scenario> scenario;
};

Loaded load_inputs(const Inputs& in, bool need_scenario) {
  Loaded l;
  std::optional<Scenario> sc;
  if (!in.scenario.empty()) sc = load_scenario(in.scenario);
  if (need_scenario && !sc) throw ConfigError("--scenario is required");
  std::string network = in.network, config = in.config;
  if (network.empty() && sc) network = sc->network_file;
  if (config.empty() && sc) config = sc->config_file;
  if (network.empty()) throw ConfigError("no network given (--network or a scenario reference)");
  l.model = load_network(network);
  if (auto sc2 = sc; sc2) {
    // reload with the network's base so _kw/_kwh request fields convert correctly
    *sc2 = load_scenario(in.scenario, l.model.base);
    sc = sc2;
  }
  l.config = config.empty() ? ControllerConfig{} : load_config(config);
  if (sc && in.steps > 0) sc->total_steps = in.steps;
  l.scenario = sc;
  return l;
}

void print_metrics(const Metrics& m) {
  std::printf("steps simulated       %d\n", m.steps);
  std::printf("requests              %d shapeable, %d deferrable (%d accepted, %d rejected)\n",
              m.shapeable_requests, m.deferrable_requests, m.accepted, m.rejected);
  std::printf("deferred requests     %d (mean delay %.3g steps)\n", m.deferred_requests, m.mean_delay);
  std::printf("peak demand           %.6g p.u. controlled, %.6g p.u. uncontrolled (reduction %.1f%%)\n",
              m.peak_controlled, m.peak_baseline, 100.0 * m.peak_reduction_ratio);
  std::printf("squared voltage range [%.6f, %.6f]\n", m.nu_min, m.nu_max);
  std::printf("shapeable energy cost %.6g\n", m.energy_cost);
  std::printf("max relaxation gap    %.3g\n", m.max_relaxation_gap);
  std::printf("unsatisfied loads     %d shapeable, %d deferrable\n", m.unsatisfied_shapeable,
              m.undelivered_deferrable);
}

int cmd_validate(const Inputs& in) {
  if (in.network.empty()) throw ConfigError("--network is required");
  NetworkModel model = load_network(in.network);
  const auto issues = validate_topology(model);
  if (!issues.empty()) {
    std::printf("%s: invalid network\n", in.network.c_str());
    for (const auto& s : issues) std::printf("  %s\n", s.c_str());
    return 1;
  }
  std::printf("%s: %d buses, %d lines, %zu batteries, radial\n", in.network.c_str(), model.num_buses(),
              model.num_lines(), model.batteries.size());
  ControllerConfig config = in.config.empty() ? ControllerConfig{} : load_config(in.config);
  if (!in.scenario.empty()) {
    const Scenario sc = load_scenario(in.scenario, model.base);
    const auto problems = validate_scenario(sc, model, config.horizon);
    if (!problems.empty()) {
      std::printf("%s: invalid scenario\n", in.scenario.c_str());
      for (const auto& s : problems) std::printf("  %s\n", s.c_str());
      return 1;
    }
    std::printf("%s: %zu requests over %d steps\n", in.scenario.c_str(), sc.requests.size(), sc.total_steps);
  }
  if (!in.config.empty()) {
    const auto topo = RadialTopology::build(model);
    const auto ref = solve_stage1(model, topo, config);
    std::printf("stage-1 reference: objective %.6g, relaxation gap %.3g\n", ref.objective, ref.relaxation_gap);
  }
  return 0;
}

int cmd_run(const Inputs& in, bool check_candidates, bool verify_delays) {
  if (in.out.empty()) throw ConfigError("--out is required");
  Loaded l = load_inputs(in, true);
  SimulationOptions opts;
  opts.check_candidates = check_candidates;
  opts.verify_min_delay = verify_delays;
  const auto trace = run_simulation(l.model, *l.scenario, l.config, opts);
  const auto baseline = uncontrolled_baseline(l.model, *l.scenario, l.config.horizon.dt);
  const auto metrics = compute_metrics(l.model, trace, baseline);
  export_trace(l.model, trace, metrics, in.out);
  print_metrics(metrics);
  if (check_candidates) std::printf("max candidate residual %.3g\n", metrics.max_candidate_residual);
  std::printf("artifacts written to %s\n", in.out.c_str());
  if (trace.failure) {
    std::fprintf(stderr, "error: %s\n", trace.failure->c_str());
    return 1;
  }
  return 0;
}

int cmd_baseline(const Inputs& in) {
  Loaded l = load_inputs(in, true);
  const auto b = uncontrolled_baseline(l.model, *l.scenario, l.config.horizon.dt);
  std::printf("uncontrolled peak %.6g p.u. over %zu steps\n", b.peak(), b.steps.size());
  if (!in.out.empty()) {
    std::filesystem::create_directories(in.out);
    std::string csv = "step,time_h,fixed,shapeable,deferrable,total\n";
    for (std::size_t k = 0; k < b.steps.size(); ++k) {
      const auto& s = b.steps[k];
      csv += std::to_string(k) + "," + format_number(k * b.dt) + "," + format_number(s.fixed) + "," +
             format_number(s.shapeable) + "," + format_number(s.deferrable) + "," + format_number(s.total()) + "\n";
    }
    write_text_file((std::filesystem::path(in.out) / "baseline_power.csv").string(), csv);
  }
  return 0;
}

int cmd_check_relaxation(const Inputs& in, double tol) {
  Loaded l = load_inputs(in, false);
  const auto topo = RadialTopology::build(l.model);
  const auto ref = solve_stage1(l.model, topo, l.config);
  const auto rep = check_relaxation_exactness(l.model, ref.flows, tol);
  std::printf("stage-1: %zu steps, max relative gap %.3g (tolerance %.3g)\n", ref.flows.steps.size(), rep.max_gap,
              tol);
  for (const auto& f : rep.flagged)
    std::printf("  step %d line %d-%d gap %.3g\n", f.step, topo.upstream[f.line], topo.downstream[f.line], f.gap);
  if (l.scenario) {
    const auto trace = run_simulation(l.model, *l.scenario, l.config);
    double worst = 0.0;
    for (const auto& s : trace.steps) worst = std::max(worst, s.relaxation_gap);
    std::printf("stage-2 over %zu steps: max relative gap %.3g\n", trace.steps.size(), worst);
    if (worst > tol) return 1;
  }
  return rep.exact() ? 0 : 1;
}

int cmd_check_recursive(const Inputs& in, int scenarios, const GeneratorParams& base_params) {
  Loaded l = load_inputs(in, false);
  GeneratorParams g = base_params;
  g.dt = l.config.horizon.dt;
  if (in.steps > 0) g.total_steps = in.steps;
  g.last_departure = std::min(g.last_departure, g.total_steps);
  int infeasible = 0, numerical = 0, total_steps = 0, admitted = 0;
  double worst_candidate = 0.0;
  for (int i = 0; i < scenarios; ++i) {
    const Scenario sc = generate_scenario(in.seed + static_cast<std::uint64_t>(i), l.model, g);
    SimulationOptions opts;
    opts.check_candidates = true;
    const auto trace = run_simulation(l.model, sc, l.config, opts);
    const auto m = compute_metrics(l.model, trace, uncontrolled_baseline(l.model, sc, g.dt));
    infeasible += m.stage2_infeasible;
    numerical += m.stage2_numerical_failures;
    total_steps += m.steps;
    admitted += m.accepted;
    worst_candidate = std::max(worst_candidate, m.max_candidate_residual);
    if (trace.failure) std::printf("seed %llu: %s\n", static_cast<unsigned long long>(in.seed + i), trace.failure->c_str());
  }
  std::printf("%d infeasible steps across %d scenarios (%d steps, %d admitted requests, %d solver failures)\n",
              infeasible, scenarios, total_steps, admitted, numerical);
  std::printf("max shifted-candidate residual %.3g\n", worst_candidate);
  return infeasible == 0 && numerical == 0 ? 0 : 1;
}

int cmd_gen_scenario(const Inputs& in, const GeneratorParams& params) {
  if (in.network.empty()) throw ConfigError("--network is required");
  const NetworkModel model = load_network(in.network);
  GeneratorParams g = params;
  if (in.steps > 0) g.total_steps = in.steps;
  if (!in.config.empty()) g.dt = load_config(in.config).horizon.dt;
  g.last_departure = std::min(g.last_departure, g.total_steps);
  if (g.shapeable_rate > 0.0 && g.need_min / (g.eta * g.c_max_max * g.dt) > g.total_steps)
    std::fprintf(stderr, "warning: shapeable energy ranges cannot be met within the run\n");
  Scenario sc = generate_scenario(in.seed, model, g);
  sc.network_file = std::filesystem::absolute(in.network).lexically_normal().string();
  if (!in.config.empty()) sc.config_file = std::filesystem::absolute(in.config).lexically_normal().string();
  const std::string text = scenario_to_json_text(sc);
  if (in.out.empty() || in.out == "-") {
    std::cout << text;
  } else {
    write_text_file(in.out, text);
    std::fprintf(stderr, "%zu requests written to %s\n", sc.requests.size(), in.out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage load shaping and voltage control for radial feeders"};
  app.require_subcommand(1);
  Inputs in;
  auto shared = [&](CLI::App* sub, bool network_required) {
    auto* net = sub->add_option("--network", in.network, "feeder JSON");
    if (network_required) net->required();
    sub->add_option("--scenario", in.scenario, "scenario JSON");
    sub->add_option("--config", in.config, "controller config JSON");
    sub->add_option("--out", in.out, "output directory or file");
    sub->add_option("--seed", in.seed, "random seed");
    sub->add_option("--steps", in.steps, "number of simulated steps");
  };

  auto* validate = app.add_subcommand("validate", "check a feeder, and optionally a scenario and config");
  shared(validate, true);

  bool check_candidates = false, verify_delays = false;
  auto* run = app.add_subcommand("run", "closed-loop simulation");
  shared(run, false);
  run->add_flag("--check-candidates", check_candidates, "verify the shifted candidate at every step");
  run->add_flag("--verify-delays", verify_delays, "re-solve every smaller delay of admitted deferrables");

  auto* baseline = app.add_subcommand("baseline", "uncontrolled demand for a scenario");
  shared(baseline, false);

  double gap_tol = 1e-5;
  auto* relax = app.add_subcommand("check-relaxation", "relaxation gap of the stage-1 (and stage-2) solves");
  shared(relax, false);
  relax->add_option("--tol", gap_tol, "relative gap tolerance");

  int scenarios = 100;
  GeneratorParams gen;
  auto* recur = app.add_subcommand("check-recursive-feasibility", "random scenarios, counting stage-2 failures");
  shared(recur, false);
  recur->add_option("--scenarios", scenarios, "number of random scenarios");
  recur->add_option("--shapeable-rate", gen.shapeable_rate, "shapeable arrivals per hour");
  recur->add_option("--deferrable-rate", gen.deferrable_rate, "deferrable arrivals per hour");

  auto* gens = app.add_subcommand("gen-scenario", "random request stream");
  shared(gens, true);
  gens->add_option("--shapeable-rate", gen.shapeable_rate, "shapeable arrivals per hour");
  gens->add_option("--deferrable-rate", gen.deferrable_rate, "deferrable arrivals per hour");
  gens->add_option("--d-max", gen.d_max, "largest delay of deferrable requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(in);
    if (*run) return cmd_run(in, check_candidates, verify_delays);
    if (*baseline) return cmd_baseline(in);
    if (*relax) return cmd_check_relaxation(in, gap_tol);
    if (*recur) return cmd_check_recursive(in, scenarios, gen);
    if (*gens) return cmd_gen_scenario(in, gen);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
