#include "doctest.h"

#include "gridshaper/assets.hpp"
#include "gridshaper/errors.hpp"

#include <numeric>

using namespace gridshaper;

namespace {

ShapeableLoad ev(int k_out) {
  ShapeableLoad l;
  l.id = "ev";
  l.bus = 1;
  l.e_des = 10.0;
  l.e_low = 0.0;
  l.e_max = 12.0;
  l.c_max = 4.0;
  l.eta = 0.9;
  l.k_out = k_out;
  return l;
}

// Lowest SOC at k from which charging flat out until k_out still reaches e_des,
// found by stepping the charger backwards.
double backward_oracle(const ShapeableLoad& l, int k, double dt) {
  double e = l.e_des;
  for (int s = l.k_out; s > k; --s) e -= l.c_max * l.eta * dt;
  return std::max(e, l.e_low);
}

}  // namespace

TEST_CASE("shapeable SOC floor") {
  const auto l = ev(24);
  CHECK(shp_soc_min(l, 20, 0.5) == doctest::Approx(2.8));
  CHECK(shp_soc_min(l, 4, 0.5) == doctest::Approx(0.0));
  CHECK(shp_soc_min(l, 24, 0.5) == doctest::Approx(10.0));
  CHECK(shp_soc_min(l, 30, 0.5) == doctest::Approx(10.0));
  for (int k = 0; k <= 24; ++k) CHECK(shp_soc_min(l, k, 0.5) == doctest::Approx(backward_oracle(l, k, 0.5)));
}

TEST_CASE("SOC floor is nondecreasing and charging at c_max from it meets e_des") {
  const auto l = ev(30);
  for (int k = 0; k < 30; ++k) {
    CHECK(shp_soc_min(l, k, 0.5) <= shp_soc_min(l, k + 1, 0.5) + 1e-12);
    double e = shp_soc_min(l, k, 0.5);
    for (int s = k; s < l.k_out; ++s) e = std::min(e + l.eta * 0.5 * l.c_max, l.e_max);
    CHECK(e >= l.e_des - 1e-12);
  }
}

TEST_CASE("SOC update") {
  CHECK(step_soc(3.0, 0.0, 0.9, 0.5, {0.0, 10.0}) == 3.0);
  CHECK(step_soc(2.8, 4.0, 0.9, 0.5, {0.0, 10.0}) == doctest::Approx(4.6));
  CHECK(step_soc(0.5, -0.2, 1.0, 0.5, {0.12, 1.0}) == doctest::Approx(0.4));
  CHECK_THROWS_AS(step_soc(9.5, 4.0, 1.0, 0.5, {0.0, 10.0}), EnvelopeViolation);
  CHECK_THROWS_AS(step_soc(0.1, -1.0, 1.0, 0.5, {0.0, 10.0}), EnvelopeViolation);
}

TEST_CASE("shifted deferrable profile") {
  DeferrableLoad d;
  d.profile = {3.0, 3.0, 0.0};
  d.d_max = 3;
  CHECK(shifted_profile(d, 0) == d.profile);
  CHECK(shifted_profile(d, 2) == std::vector<double>{0.0, 0.0, 3.0, 3.0, 0.0});
  for (int s = 0; s <= 3; ++s) {
    const auto p = shifted_profile(d, s);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(6.0));
  }
  CHECK_THROWS_AS(shifted_profile(d, 4), std::out_of_range);
  CHECK_THROWS_AS(shifted_profile(d, -1), std::out_of_range);
}

TEST_CASE("fleet registry and incidence") {
  Fleet f;
  auto a = ev(10);
  a.id = "a";
  a.bus = 4;
  auto b = ev(12);
  b.id = "b";
  b.bus = 4;
  auto c = ev(8);
  c.id = "c";
  c.bus = 2;
  f.add_shapeable(a);
  f.add_shapeable(b);
  f.add_shapeable(c);
  CHECK_THROWS_AS(f.add_shapeable(a), std::invalid_argument);

  const auto K = f.incidence(6);
  for (int j = 0; j < 3; ++j) {
    int sum = 0;
    for (int i = 0; i < 6; ++i) sum += K[i][j];
    CHECK(sum == 1);
    CHECK(K[f.shapeable()[j].bus][j] == 1);
  }
  const auto bp = aggregate_bus_power(f, {1.0, 2.0, 0.5}, 0, 6);
  CHECK(bp.shapeable[4] == doctest::Approx(3.0));
  CHECK(bp.shapeable[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(aggregate_bus_power(f, {1.0}, 0, 6), std::invalid_argument);

  CHECK(f.k_out_max() == 12);
  const auto gone = f.remove_plugged_out(10);
  CHECK(gone == std::vector<std::string>{"a", "c"});
  CHECK(f.num_shapeable() == 1);
}

TEST_CASE("deferrable power lookup after a delay") {
  Fleet f;
  CHECK(aggregate_bus_power(f, {}, 0, 3).shapeable == std::vector<double>(3, 0.0));
  DeferrableLoad d;
  d.id = "d";
  d.bus = 2;
  d.profile = {3.0};
  d.request_step = 5;
  d.d_max = 2;
  d.plug_in_step = 6;
  f.add_deferrable(d);
  CHECK(aggregate_bus_power(f, {}, 5, 3).deferrable[2] == 0.0);
  CHECK(aggregate_bus_power(f, {}, 6, 3).deferrable[2] == 3.0);
  CHECK(aggregate_bus_power(f, {}, 7, 3).deferrable[2] == 0.0);
  CHECK(f.k_out_max() == 7);
  DeferrableLoad pending = d;
  pending.id = "e";
  pending.plug_in_step.reset();
  CHECK_THROWS_AS(f.add_deferrable(pending), std::invalid_argument);
}
