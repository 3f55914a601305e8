#include "doctest.h"
#include "fixtures.hpp"

#include "gridshaper/errors.hpp"
#include "gridshaper/scenario.hpp"
#include "gridshaper/simulator.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gridshaper;
namespace fs = std::filesystem;

namespace {

ControllerConfig small_config() {
  ControllerConfig c;
  c.horizon = {1.0, 4, 16};
  c.price = PriceSignal::time_of_use(1.0, 16);
  return c;
}

PlugRequest shapeable(const std::string& id, int bus, int step, double e0, double e_des, double c_max, int k_out) {
  PlugRequest r;
  r.kind = RequestKind::Shapeable;
  r.step = step;
  r.shapeable = {id, bus, e0, 0.0, 1.0, e_des, c_max, 0.9, step, k_out};
  return r;
}

PlugRequest deferrable(const std::string& id, int bus, int step, std::vector<double> profile, int d_max) {
  PlugRequest r;
  r.kind = RequestKind::Deferrable;
  r.step = step;
  r.deferrable.id = id;
  r.deferrable.bus = bus;
  r.deferrable.profile = std::move(profile);
  r.deferrable.request_step = step;
  r.deferrable.d_max = d_max;
  return r;
}

Scenario busy_scenario() {
  Scenario sc;
  sc.total_steps = 12;
  sc.requests = {shapeable("ev1", 2, 1, 0.05, 0.25, 0.08, 8), deferrable("wash", 1, 2, {0.04, 0.04}, 2),
                 shapeable("ev2", 3, 3, 0.0, 0.15, 0.06, 10)};
  return sc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridshaper_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("an empty scenario follows the reference and exports header-only load files") {
  const auto m = fixtures::small_feeder(16);
  Scenario sc;
  sc.total_steps = 6;
  const auto trace = run_simulation(m, sc, small_config());
  REQUIRE_FALSE(trace.failure);
  REQUIRE(trace.steps.size() == 6);
  CHECK(trace.decisions.empty());
  // the battery schedule is not unique without loads; the reference is a
  // feasible window so stage-2 can only match or beat its voltage and loss cost
  const auto cfg = small_config();
  for (const auto& s : trace.steps) {
    CHECK(s.shapeable.empty());
    double ref_cost = 0.0;
    for (int t = s.step; t < s.step + cfg.horizon.N; ++t) {
      const auto& f = trace.reference.flow(t);
      for (int i = 1; i < m.num_buses(); ++i) ref_cost += cfg.weights.T3[0] * (f.nu[i] - m.nu0) * (f.nu[i] - m.nu0);
      for (int l = 0; l < m.num_lines(); ++l) ref_cost += cfg.loss_weight * m.lines[l].r * f.l[l];
    }
    CHECK(s.objective <= ref_cost + 1e-7);
  }
  for (const auto& e : trace.battery_soc)
    for (std::size_t b = 0; b < m.batteries.size(); ++b) {
      CHECK(e[b] >= m.batteries[b].e_low - 1e-9);
      CHECK(e[b] <= m.batteries[b].e_max + 1e-9);
    }

  const auto dir = scratch("empty");
  export_trace(m, trace, compute_metrics(m, trace, uncontrolled_baseline(m, sc, 1.0)), dir.string());
  CHECK(slurp(dir / "soc_shapeable.csv") == "step,time_h,id,bus,soc,power\n");
  CHECK(slurp(dir / "decisions.csv") == "step,id,kind,bus,accepted,delay,plug_in_step,reason\n");
  const auto volt = slurp(dir / "voltages.csv");
  CHECK(std::count(volt.begin(), volt.end(), '\n') == 7);
  const auto bat = slurp(dir / "soc_battery.csv");
  CHECK(std::count(bat.begin(), bat.end(), '\n') == 8);
  fs::remove_all(dir);
}

TEST_CASE("closed loop with loads: balance, state replay and satisfaction") {
  const auto m = fixtures::small_feeder(16);
  const auto sc = busy_scenario();
  const auto trace = run_simulation(m, sc, small_config());
  REQUIRE_FALSE(trace.failure);
  REQUIRE(trace.decisions.size() == 3);
  for (const auto& d : trace.decisions) CHECK(d.accepted);

  for (const auto& s : trace.steps) {
    CHECK(s.power.substation - s.power.losses == doctest::Approx(s.power.total()).epsilon(1e-6));
    CHECK(s.relaxation_gap <= 1e-5);
  }

  // battery states replay from the applied powers
  for (std::size_t k = 0; k < trace.steps.size(); ++k)
    for (std::size_t b = 0; b < m.batteries.size(); ++b)
      CHECK(trace.battery_soc[k + 1][b] ==
            doctest::Approx(trace.battery_soc[k][b] + trace.dt * trace.steps[k].battery_power[b]).epsilon(1e-9));

  // shapeable states replay from the applied charging power
  for (std::size_t k = 0; k + 1 < trace.steps.size(); ++k)
    for (const auto& a : trace.steps[k].shapeable) {
      const auto& next = trace.steps[k + 1].shapeable;
      const auto it = std::find_if(next.begin(), next.end(), [&](const auto& x) { return x.id == a.id; });
      if (it == next.end()) continue;
      CHECK(it->soc == doctest::Approx(a.soc + 0.9 * trace.dt * a.power).epsilon(1e-9));
      CHECK(a.power >= -1e-9);
      CHECK(a.power <= 0.08 + 1e-9);
    }

  REQUIRE(trace.shapeable_outcomes.size() == 2);
  for (const auto& o : trace.shapeable_outcomes) {
    CHECK(o.left);
    CHECK(o.e_final >= o.e_des - 1e-6);
  }
  REQUIRE(trace.deferrable_outcomes.size() == 1);
  CHECK(trace.deferrable_outcomes[0].finished);
  CHECK(trace.deferrable_outcomes[0].energy_delivered == doctest::Approx(0.08).epsilon(1e-9));
}

TEST_CASE("uncontrolled baseline") {
  const auto m = fixtures::small_feeder(16);
  Scenario sc;
  sc.total_steps = 16;
  const auto empty = uncontrolled_baseline(m, sc, 1.0);
  double fixed_peak = 0.0;
  int peak_step = 0;
  for (int k = 0; k < 16; ++k) {
    double s = 0.0;
    for (int i = 1; i < m.num_buses(); ++i) s += m.forecast.p_at(k, i);
    if (s > fixed_peak) {
      fixed_peak = s;
      peak_step = k;
    }
  }
  CHECK(empty.peak() == doctest::Approx(fixed_peak).epsilon(1e-12));

  // one load starting at the peak charges at full rate there
  sc.requests = {shapeable("ev", 1, peak_step, 0.0, 0.5, 0.07, 15)};
  const auto one = uncontrolled_baseline(m, sc, 1.0);
  CHECK(one.peak() == doctest::Approx(fixed_peak + 0.07).epsilon(1e-12));
  CHECK(one.steps[peak_step].shapeable == doctest::Approx(0.07));
}

TEST_CASE("identical inputs give byte-identical exports") {
  const auto m = fixtures::small_feeder(16);
  const auto sc = busy_scenario();
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    SimulationOptions opts;
    opts.check_candidates = true;
    const auto t = run_simulation(m, sc, small_config(), opts);
    export_trace(m, t, compute_metrics(m, t, uncontrolled_baseline(m, sc, 1.0)), dir.string());
  }
  for (const char* f : {"voltages.csv", "soc_shapeable.csv", "soc_battery.csv", "aggregate_power.csv",
                        "decisions.csv", "metrics.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("candidate residuals are recorded after the first step") {
  const auto m = fixtures::small_feeder(16);
  SimulationOptions opts;
  opts.check_candidates = true;
  const auto t = run_simulation(m, busy_scenario(), small_config(), opts);
  REQUIRE_FALSE(t.failure);
  CHECK_FALSE(t.steps[0].candidate_residual);
  for (std::size_t k = 1; k < t.steps.size(); ++k) {
    REQUIRE(t.steps[k].candidate_residual);
    CHECK(*t.steps[k].candidate_residual <= 1e-6);
  }
}

TEST_CASE("scenario generator") {
  const auto m = fixtures::small_feeder(16);
  GeneratorParams g;
  g.total_steps = 40;
  g.last_departure = 38;
  const auto s1 = generate_scenario(11, m, g), s2 = generate_scenario(11, m, g), s3 = generate_scenario(12, m, g);
  CHECK(scenario_to_json_text(s1) == scenario_to_json_text(s2));
  CHECK(scenario_to_json_text(s1) != scenario_to_json_text(s3));
  CHECK_FALSE(s1.requests.empty());
  CHECK(validate_scenario(s1, m, {1.0, 6, 16}).empty());
  for (const auto& r : s1.requests) {
    if (r.kind == RequestKind::Shapeable) {
      CHECK(r.shapeable.k_out <= 38);
    } else {
      CHECK(r.step + r.deferrable.d_max + static_cast<int>(r.deferrable.profile.size()) <= 38);
    }
  }

  g.shapeable_rate = g.deferrable_rate = 0.0;
  CHECK(generate_scenario(11, m, g).requests.empty());
}

TEST_CASE("scenario json round trip and validation") {
  const auto m = fixtures::small_feeder(16);
  auto sc = busy_scenario();
  const auto back = scenario_from_json_text(scenario_to_json_text(sc));
  CHECK(scenario_to_json_text(back) == scenario_to_json_text(sc));
  CHECK(back.requests.size() == 3);
  CHECK(back.requests[1].deferrable.profile == std::vector<double>{0.04, 0.04});

  sc.requests.push_back(shapeable("ev1", 2, 4, 0.0, 0.1, 0.05, 9));
  sc.requests.push_back(shapeable("far", 9, 4, 0.0, 0.1, 0.05, 9));
  sc.requests.push_back(shapeable("late", 1, 20, 0.0, 0.1, 0.05, 25));
  const auto errs = validate_scenario(sc, m, {1.0, 4, 16});
  CHECK(errs.size() >= 3);
}

TEST_CASE("request fields in kW and kWh convert through the base") {
  PerUnitBase base;
  base.s_base_kva = 100.0;
  const auto sc = scenario_from_json_text(R"({"total_steps": 10, "requests": [
    {"kind": "shapeable", "id": "a", "bus": 1, "step": 0, "e0_kwh": 5, "e_low": 0, "e_max_kwh": 50,
     "e_des_kwh": 20, "c_max_kw": 7, "eta": 0.9, "k_out": 8},
    {"kind": "deferrable", "id": "b", "bus": 2, "step": 1, "profile_kw": [3, 3], "d_max": 2}]})",
                                          base);
  REQUIRE(sc.requests.size() == 2);
  CHECK(sc.requests[0].shapeable.e == doctest::Approx(0.05));
  CHECK(sc.requests[0].shapeable.e_des == doctest::Approx(0.2));
  CHECK(sc.requests[0].shapeable.c_max == doctest::Approx(0.07));
  CHECK(sc.requests[1].deferrable.profile[1] == doctest::Approx(0.03));
}

TEST_CASE("controller config parsing") {
  const auto c = config_from_json_text(R"({"dt_hours": 1.0, "N": 6, "N_r": 24,
    "weights": {"T1": [1, 2], "T2": 3, "T3": 4}, "nu_nom": 0.98, "loss_weight": 0.5,
    "price": {"type": "array", "values": [1, 2, 3]}})");
  CHECK(c.horizon.dt == 1.0);
  CHECK(c.horizon.N == 6);
  CHECK(c.horizon.N_r == 24);
  CHECK(c.weights.T1 == std::vector<double>{1, 2});
  CHECK(c.weights.T2 == std::vector<double>{3});
  CHECK(*c.nu_nom == doctest::Approx(0.98));
  CHECK(c.loss_weight == 0.5);
  CHECK(c.price.at(1) == 2.0);

  const auto d = config_from_json_text(R"({"dt_hours": 0.5, "N": 10, "N_r": 96})");
  CHECK(d.price.at(0) < d.price.at(36));  // 18h falls in the peak window

  CHECK_THROWS_AS(config_from_json_text(R"({"dt_hours": 1.0, "N": 30, "N_r": 24})"), ConfigError);
}
