#pragma once

#include <optional>
#include <string>
#include <vector>

namespace gridshaper {

/// A load with continuously adjustable charging power in [0, c_max] that
/// must hold at least e_des by its plug-out step. Energies are p.u.-hours,
/// powers p.u.
struct ShapeableLoad {
  std::string id;
  int bus = 0;
  double e = 0.0;  // current state of charge
  double e_low = 0.0;
  double e_max = 0.0;
  double e_des = 0.0;
  double c_max = 0.0;
  double eta = 1.0;
  int k_in = 0;
  int k_out = 0;
};

/// A load with a fixed power profile whose start may be postponed by at
/// most d_max steps.
struct DeferrableLoad {
  std::string id;
  int bus = 0;
  std::vector<double> profile;
  double eta = 1.0;
  int request_step = 0;
  int d_max = 0;
  std::optional<int> plug_in_step;

  /// Power drawn at absolute step k; zero before plug-in, after the
  /// profile ends, or while not admitted.
  double power_at(int k) const;
  /// First step after the profile has been delivered.
  int end_step() const;
  double energy(double dt) const;
};

/// Perfect-efficiency storage. Negative power discharges into the grid.
struct BatteryBank {
  std::string id;
  int bus = 0;
  double e0 = 0.0;  // unused when the simulation starts from the reference
  double e_low = 0.0;
  double e_max = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double eta = 1.0;
};

/// Time-varying lower SOC bound that keeps a full charge by k_out reachable:
/// max(e_des - max(0, (k_out - k) c_max eta dt), e_low).
double shp_soc_min(const ShapeableLoad& load, int k, double dt);

struct SocEnvelope {
  double lower;
  double upper;
};

/// e + eta * dt * power, rejected if the result leaves `envelope` by more
/// than `tolerance`.
double step_soc(double e, double power, double eta, double dt, SocEnvelope envelope, double tolerance = 1e-7);

/// Profile preceded by d zeros. Throws std::out_of_range unless 0 <= d <= d_max.
std::vector<double> shifted_profile(const DeferrableLoad& load, int d);

/// Registry of connected flexible loads. Mutated only between controller
/// steps by the admission protocol and plug-outs.
class Fleet {
public:
  const std::vector<ShapeableLoad>& shapeable() const { return shapeable_; }
  const std::vector<DeferrableLoad>& deferrable() const { return deferrable_; }
  std::vector<ShapeableLoad>& shapeable_mut() { return shapeable_; }

  bool contains(const std::string& id) const;
  /// Throws std::invalid_argument on duplicate id.
  void add_shapeable(ShapeableLoad load);
  /// The load must carry its plug-in step. Throws on duplicate id.
  void add_deferrable(DeferrableLoad load);

  /// Removes shapeable loads with k_out <= k and deferrable loads whose
  /// profile ended at or before k. Returns removed ids.
  std::vector<std::string> remove_plugged_out(int k);

  int num_shapeable() const { return static_cast<int>(shapeable_.size()); }

  /// n_buses x M_shp 0/1 bus incidence of the shapeable loads.
  std::vector<std::vector<int>> incidence(int n_buses) const;
  std::vector<int> shapeable_count_per_bus(int n_buses) const;
  std::vector<int> deferrable_count_per_bus(int n_buses) const;

  /// Largest plug-out step over connected loads (deferrable: end of profile);
  /// nullopt when the fleet is empty.
  std::optional<int> k_out_max() const;

  /// Deferrable power per bus at absolute step k.
  std::vector<double> deferrable_power(int k, int n_buses) const;

private:
  std::vector<ShapeableLoad> shapeable_;
  std::vector<DeferrableLoad> deferrable_;
};

struct BusPower {
  std::vector<double> shapeable;
  std::vector<double> deferrable;
};

/// Per-bus shapeable totals K_shp * u_shp and deferrable totals at step k.
BusPower aggregate_bus_power(const Fleet& fleet, const std::vector<double>& u_shp, int k, int n_buses);

}  // namespace gridshaper
