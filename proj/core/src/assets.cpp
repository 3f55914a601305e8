#include "gridshaper/assets.hpp"

#include "gridshaper/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gridshaper {

double DeferrableLoad::power_at(int k) const {
  if (!plug_in_step) return 0.0;
  const int idx = k - *plug_in_step;
  if (idx < 0 || idx >= static_cast<int>(profile.size())) return 0.0;
  return profile[idx];
}

int DeferrableLoad::end_step() const {
  const int start = plug_in_step.value_or(request_step);
  return start + static_cast<int>(profile.size());
}

double DeferrableLoad::energy(double dt) const {
  return dt * std::accumulate(profile.begin(), profile.end(), 0.0);
}

double shp_soc_min(const ShapeableLoad& load, int k, double dt) {
  const double slack = std::max(0.0, (load.k_out - k) * load.c_max * load.eta * dt);
  return std::max(load.e_des - slack, load.e_low);
}

double step_soc(double e, double power, double eta, double dt, SocEnvelope envelope, double tolerance) {
  const double next = e + eta * dt * power;
  if (next < envelope.lower - tolerance || next > envelope.upper + tolerance) {
    std::ostringstream msg;
    msg << "state of charge " << next << " outside [" << envelope.lower << ", " << envelope.upper << "]";
    throw EnvelopeViolation(msg.str());
  }
  return next;
}

std::vector<double> shifted_profile(const DeferrableLoad& load, int d) {
  if (d < 0 || d > load.d_max)
    throw std::out_of_range("delay " + std::to_string(d) + " outside [0, " + std::to_string(load.d_max) + "]");
  std::vector<double> out(d, 0.0);
  out.insert(out.end(), load.profile.begin(), load.profile.end());
  return out;
}

bool Fleet::contains(const std::string& id) const {
  auto same = [&](const auto& l) { return l.id == id; };
  return std::any_of(shapeable_.begin(), shapeable_.end(), same) ||
         std::any_of(deferrable_.begin(), deferrable_.end(), same);
}

void Fleet::add_shapeable(ShapeableLoad load) {
  if (contains(load.id)) throw std::invalid_argument("duplicate asset id '" + load.id + "'");
  shapeable_.push_back(std::move(load));
}

void Fleet::add_deferrable(DeferrableLoad load) {
  if (contains(load.id)) throw std::invalid_argument("duplicate asset id '" + load.id + "'");
  if (!load.plug_in_step) throw std::invalid_argument("deferrable load '" + load.id + "' has no plug-in step");
  deferrable_.push_back(std::move(load));
}

std::vector<std::string> Fleet::remove_plugged_out(int k) {
  std::vector<std::string> removed;
  auto drop_shp = [&](const ShapeableLoad& l) {
    if (l.k_out > k) return false;
    removed.push_back(l.id);
    return true;
  };
  auto drop_def = [&](const DeferrableLoad& l) {
    if (l.end_step() > k) return false;
    removed.push_back(l.id);
    return true;
  };
  shapeable_.erase(std::remove_if(shapeable_.begin(), shapeable_.end(), drop_shp), shapeable_.end());
  deferrable_.erase(std::remove_if(deferrable_.begin(), deferrable_.end(), drop_def), deferrable_.end());
  return removed;
}

std::vector<std::vector<int>> Fleet::incidence(int n_buses) const {
  std::vector<std::vector<int>> K(n_buses, std::vector<int>(shapeable_.size(), 0));
  for (std::size_t j = 0; j < shapeable_.size(); ++j) {
    const int bus = shapeable_[j].bus;
    if (bus < 0 || bus >= n_buses) throw std::out_of_range("shapeable load '" + shapeable_[j].id + "' on unknown bus");
    K[bus][j] = 1;
  }
  return K;
}

std::vector<int> Fleet::shapeable_count_per_bus(int n_buses) const {
  std::vector<int> out(n_buses, 0);
  for (const auto& l : shapeable_) out.at(l.bus) += 1;
  return out;
}

std::vector<int> Fleet::deferrable_count_per_bus(int n_buses) const {
  std::vector<int> out(n_buses, 0);
  for (const auto& l : deferrable_) out.at(l.bus) += 1;
  return out;
}

std::optional<int> Fleet::k_out_max() const {
  std::optional<int> out;
  auto bump = [&](int k) { out = out ? std::max(*out, k) : k; };
  for (const auto& l : shapeable_) bump(l.k_out);
  for (const auto& l : deferrable_) bump(l.end_step());
  return out;
}

std::vector<double> Fleet::deferrable_power(int k, int n_buses) const {
  std::vector<double> out(n_buses, 0.0);
  for (const auto& l : deferrable_) out.at(l.bus) += l.power_at(k);
  return out;
}

BusPower aggregate_bus_power(const Fleet& fleet, const std::vector<double>& u_shp, int k, int n_buses) {
  if (static_cast<int>(u_shp.size()) != fleet.num_shapeable())
    throw std::invalid_argument("aggregate_bus_power: expected " + std::to_string(fleet.num_shapeable()) +
                                " shapeable powers, got " + std::to_string(u_shp.size()));
  BusPower out{std::vector<double>(n_buses, 0.0), fleet.deferrable_power(k, n_buses)};
  for (std::size_t j = 0; j < u_shp.size(); ++j) out.shapeable.at(fleet.shapeable()[j].bus) += u_shp[j];
  return out;
}

}  // namespace gridshaper
