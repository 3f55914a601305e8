#include "doctest.h"
#include "fixtures.hpp"

#include "gridshaper/pnp.hpp"

#include <algorithm>

using namespace gridshaper;

namespace {

struct Bench {
  NetworkModel model;
  RadialTopology topo;
  ControllerConfig config;
  ReferenceTrajectory reference;

  Bench(NetworkModel m, int N, int N_r, double dt) : model(std::move(m)), topo(RadialTopology::build(model)) {
    config.horizon = {dt, N, N_r};
    config.price = PriceSignal::time_of_use(dt, N_r);
    reference = solve_stage1(model, topo, config);
  }

  ControllerContext ctx() const { return {model, topo, config, reference}; }

  SystemState state(int k, Fleet fleet = {}) const {
    SystemState s{k, std::move(fleet), {}};
    for (std::size_t b = 0; b < model.batteries.size(); ++b)
      s.battery_soc.push_back(reference.battery_soc(k, static_cast<int>(b)));
    return s;
  }
};

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

}  // namespace

TEST_CASE("a shapeable request already at its target is admitted") {
  const Bench b(fixtures::small_feeder(16), 4, 16, 1.0);
  const auto d = admit_shapeable(shapeable("ev", 2, 3, 0.4, 0.4, 0.05, 9), b.state(3), b.ctx());
  CHECK(d.accepted);
  CHECK(d.plug_in_step == 3);
  CHECK(d.witness.optimal());
  CHECK(d.shapeable.k_in == 3);
}

TEST_CASE("a shapeable request with too short a deadline is rejected before solving") {
  const Bench b(fixtures::small_feeder(16), 4, 16, 1.0);
  // 0.5 missing, at most 2 * 0.9 * 0.1 = 0.18 deliverable
  const auto d = admit_shapeable(shapeable("ev", 2, 3, 0.1, 0.6, 0.1, 5), b.state(3), b.ctx());
  CHECK_FALSE(d.accepted);
  CHECK_FALSE(d.retry);
  CHECK(d.attempts.empty());
  CHECK(d.reason.find("later k_out or lower e_des") != std::string::npos);

  const auto above = admit_shapeable(shapeable("ev2", 2, 3, 0.7, 0.6, 0.1, 12), b.state(3), b.ctx());
  CHECK_FALSE(above.accepted);
  CHECK(above.attempts.empty());
}

TEST_CASE("a shapeable request on a loaded bus is admitted and its witness respects the envelopes") {
  const Bench b(fixtures::small_feeder(16, 1.6), 6, 16, 1.0);
  const auto d = admit_shapeable(shapeable("ev", 3, 2, 0.1, 0.5, 0.1, 14), b.state(2), b.ctx());
  REQUIRE(d.accepted);
  const auto& w = d.witness;
  const ShapeableLoad& l = d.shapeable;
  for (int i = 0; i <= 6; ++i) {
    CHECK(w.e_shp[i][0] >= shp_soc_min(l, 2 + i, 1.0) - 1e-7);
    CHECK(w.e_shp[i][0] <= l.e_max + 1e-7);
  }
  for (const auto& f : w.flows.steps)
    for (double nu : f.nu) {
      CHECK(nu >= b.model.nu_min - 1e-6);
      CHECK(nu <= b.model.nu_max + 1e-6);
    }
  const auto lemma = check_lemma1_conditions(b.model, b.reference, [&] {
    Fleet f;
    f.add_shapeable(l);
    return f;
  }(), w.e_shp.back(), 2, b.config.horizon);
  CHECK(lemma.holds());
}

TEST_CASE("a deferrable request on an unconstrained network starts at once") {
  const Bench b(fixtures::small_feeder(16), 4, 16, 1.0);
  const auto d = admit_deferrable(deferrable("wash", 1, 5, {0.03, 0.03, 0.03}, 3), b.state(5), b.ctx());
  REQUIRE(d.accepted);
  CHECK(d.delay == 0);
  CHECK(d.plug_in_step == 5);
  CHECK(d.attempts.size() == 1);
}

TEST_CASE("the chosen delay is the smallest feasible one") {
  const Bench b(fixtures::squeezed_feeder(), 4, 8, 1.0);
  const auto req = deferrable("dryer", 2, 0, {0.1}, 3);
  const auto d = admit_deferrable(req, b.state(0), b.ctx());
  REQUIRE(d.accepted);
  CHECK(d.delay == 2);
  CHECK(d.plug_in_step == 2);

  // exhaustive oracle over every delay
  const auto all = enumerate_delays(req, b.state(0), b.ctx());
  REQUIRE(all.size() == 4);
  CHECK(all[0].status == SolveStatus::Infeasible);
  CHECK(all[1].status == SolveStatus::Infeasible);
  CHECK(all[2].status == SolveStatus::Optimal);
  CHECK(all[3].status == SolveStatus::Optimal);
}

TEST_CASE("a deferrable request with no feasible delay is rejected") {
  const Bench b(fixtures::squeezed_feeder(), 4, 8, 1.0);
  const auto d = admit_deferrable(deferrable("dryer", 2, 0, {0.1}, 1), b.state(0), b.ctx());
  CHECK_FALSE(d.accepted);
  CHECK(d.attempts.size() == 2);
}

TEST_CASE("requests are validated against the horizon and network") {
  const Bench b(fixtures::small_feeder(16), 4, 16, 1.0);
  CHECK_FALSE(validate_request(deferrable("x", 1, 0, {0.1}, 4), b.model, b.config.horizon).empty());
  CHECK_FALSE(validate_request(deferrable("x", 9, 0, {0.1}, 1), b.model, b.config.horizon).empty());
  CHECK_FALSE(validate_request(deferrable("x", 1, 0, {}, 1), b.model, b.config.horizon).empty());
  CHECK_FALSE(validate_request(shapeable("x", 1, 4, 0.1, 0.2, 0.1, 4), b.model, b.config.horizon).empty());
  CHECK(validate_request(shapeable("x", 1, 4, 0.1, 0.2, 0.1, 8), b.model, b.config.horizon).empty());
}

TEST_CASE("applying decisions extends the fleet once") {
  const Bench b(fixtures::small_feeder(16), 4, 16, 1.0);
  const auto d = admit_deferrable(deferrable("wash", 1, 5, {0.03, 0.03}, 3), b.state(5), b.ctx());
  REQUIRE(d.accepted);
  Fleet fleet;
  apply_decision(fleet, d);
  CHECK(fleet.deferrable().size() == 1);
  CHECK(fleet.deferrable()[0].plug_in_step == 5);
  CHECK_THROWS_AS(apply_decision(fleet, d), std::invalid_argument);
  CHECK(fleet.deferrable().size() == 1);

  AdmissionDecision rejected;
  rejected.id = "nope";
  CHECK_THROWS_AS(apply_decision(fleet, rejected), std::invalid_argument);
  CHECK(fleet.deferrable().size() == 1);
  CHECK(fleet.num_shapeable() == 0);
}

TEST_CASE("a delayed deferrable keeps its energy") {
  const Bench b(fixtures::squeezed_feeder(), 4, 8, 1.0);
  const auto d = admit_deferrable(deferrable("dryer", 2, 0, {0.1}, 3), b.state(0), b.ctx());
  REQUIRE(d.accepted);
  double e = 0.0;
  for (int k = 0; k < 8; ++k) e += d.deferrable.power_at(k);
  CHECK(e == doctest::Approx(0.1));
  CHECK(d.deferrable.power_at(0) == 0.0);
  CHECK(d.deferrable.power_at(d.plug_in_step) == doctest::Approx(0.1));
}
