#pragma once

#include "gridshaper/network.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace fixtures {

// Chain 0-1-...-n with identical lines, a constant load per bus repeated over
// `steps` forecast rows.
inline gridshaper::NetworkModel chain(int n, double r, double x, double p, double q, int steps = 1) {
  gridshaper::NetworkModel m;
  for (int i = 0; i <= n; ++i) m.buses.push_back({i, false, 0.0, 0.0, -1});
  for (int i = 1; i <= n; ++i) m.lines.push_back({i - 1, i, r, x});
  m.forecast.p.assign(steps, std::vector<double>(n, p));
  m.forecast.q.assign(steps, std::vector<double>(n, q));
  return m;
}

inline void add_battery(gridshaper::NetworkModel& m, int bus, double e_low, double e_max, double p_min, double p_max) {
  gridshaper::BatteryBank b;
  b.id = "B" + std::to_string(bus);
  b.bus = bus;
  b.e_low = e_low;
  b.e_max = e_max;
  b.e0 = e_low;
  b.p_min = p_min;
  b.p_max = p_max;
  m.buses[bus].battery = static_cast<int>(m.batteries.size());
  m.batteries.push_back(b);
}

inline void add_capacitor(gridshaper::NetworkModel& m, int bus, double q_min, double q_max) {
  m.buses[bus].has_capacitor = true;
  m.buses[bus].q_min = q_min;
  m.buses[bus].q_max = q_max;
}

// Random radial feeder: every bus i > 0 attaches to a uniformly chosen earlier
// bus; lines and loads drawn from small ranges.
inline gridshaper::NetworkModel random_tree(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> imp(0.002, 0.02), load(0.0, 0.08), ratio(0.1, 0.6);
  gridshaper::NetworkModel m;
  for (int i = 0; i <= n; ++i) m.buses.push_back({i, false, 0.0, 0.0, -1});
  std::vector<double> p(n), q(n);
  for (int i = 1; i <= n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    m.lines.push_back({parent(rng), i, imp(rng), imp(rng)});
    p[i - 1] = load(rng);
    q[i - 1] = p[i - 1] * ratio(rng);
  }
  m.forecast.p = {p};
  m.forecast.q = {q};
  return m;
}

// Three load buses on a short chain with a battery on every load bus and a
// capacitor at the end; a daily-shaped load over `period` steps.
inline gridshaper::NetworkModel small_feeder(int period = 16, double scale = 1.0) {
  auto m = chain(3, 0.01, 0.008, 0.0, 0.0, period);
  for (int t = 0; t < period; ++t) {
    const double shape = 0.6 + 0.4 * std::sin(3.14159265358979 * t / period);
    for (int i = 0; i < 3; ++i) {
      m.forecast.p[t][i] = scale * 0.08 * shape;
      m.forecast.q[t][i] = scale * 0.025 * shape;
    }
  }
  for (int bus = 1; bus <= 3; ++bus) add_battery(m, bus, 0.12, 1.0, -0.2, 0.2);
  add_capacitor(m, 3, 0.0, 0.1);
  return m;
}

// two buses, heavy load in the first two steps of an 8-step day, no storage
inline gridshaper::NetworkModel squeezed_feeder() {
  auto m = chain(2, 0.05, 0.05, 0.05, 0.015, 8);
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 2; ++i) {
      m.forecast.p[t][i] = 0.22;
      m.forecast.q[t][i] = 0.066;
    }
  return m;
}

}  // namespace fixtures
