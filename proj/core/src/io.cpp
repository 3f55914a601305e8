#include "gridshaper/io.hpp"

#include "gridshaper/errors.hpp"
#include "json_util.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace gridshaper {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

using detail::Json;
using detail::number_or;
using detail::required;

double impedance(const Json& j, const char* key, const PerUnitBase& base) {
  const std::string pu = std::string(key) + "_pu";
  const std::string ohm = std::string(key) + "_ohm";
  if (j.contains(pu)) return required<double>(j, pu);
  if (j.contains(ohm)) return base.impedance_to_pu(required<double>(j, ohm));
  if (j.contains(key)) return required<double>(j, key);
  throw ConfigError(std::string("line is missing '") + key + "_pu'");
}

std::vector<std::vector<double>> matrix(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of rows");
  std::vector<std::vector<double>> out;
  for (const auto& row : j) {
    if (!row.is_array()) throw ConfigError(what + " must be an array of rows");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) throw ConfigError(what + " holds a non-numeric entry");
      r.push_back(v.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

NetworkModel network_from_json_text(const std::string& text) {
  const Json doc = detail::parse_json(text);
  NetworkModel m;
  if (doc.contains("base")) {
    const auto& b = doc.at("base");
    m.base.s_base_kva = number_or(b, "S_base_kVA", m.base.s_base_kva);
    m.base.v_base_kv = number_or(b, "V_base_kV", m.base.v_base_kv);
    if (!(m.base.s_base_kva > 0.0 && m.base.v_base_kv > 0.0)) throw ConfigError("base values must be positive");
  }
  const double v0 = number_or(doc, "v0_pu", 1.0);
  m.nu0 = v0 * v0;
  if (doc.contains("v_bounds_pu")) {
    const auto& vb = doc.at("v_bounds_pu");
    if (!vb.is_array() || vb.size() != 2) throw ConfigError("v_bounds_pu must be [v_min, v_max]");
    m.nu_min = vb[0].get<double>() * vb[0].get<double>();
    m.nu_max = vb[1].get<double>() * vb[1].get<double>();
  }

  std::map<std::string, int> battery_index;
  if (doc.contains("batteries")) {
    for (const auto& jb : doc.at("batteries")) {
      BatteryBank b;
      b.id = required<std::string>(jb, "id");
      b.bus = -1;
      b.e_low = detail::energy(jb, "e_low", m.base);
      b.e_max = detail::energy(jb, "e_max", m.base);
      b.e0 = jb.contains("e0") || jb.contains("e0_kwh") ? detail::energy(jb, "e0", m.base) : b.e_low;
      b.p_min = detail::power(jb, "p_min", m.base);
      b.p_max = detail::power(jb, "p_max", m.base);
      b.eta = number_or(jb, "eta", 1.0);
      if (battery_index.count(b.id)) throw ConfigError("duplicate battery id '" + b.id + "'");
      battery_index[b.id] = static_cast<int>(m.batteries.size());
      m.batteries.push_back(b);
    }
  }

  for (const auto& jb : required<Json>(doc, "buses")) {
    Bus b;
    b.id = required<int>(jb, "id");
    if (jb.contains("capacitor") && !jb.at("capacitor").is_null()) {
      const auto& c = jb.at("capacitor");
      b.has_capacitor = true;
      b.q_min = detail::power(c, "q_min", m.base);
      b.q_max = detail::power(c, "q_max", m.base);
    }
    if (jb.contains("battery") && !jb.at("battery").is_null()) {
      const auto id = jb.at("battery").get<std::string>();
      auto it = battery_index.find(id);
      if (it == battery_index.end()) throw ConfigError("bus " + std::to_string(b.id) + " references unknown battery '" + id + "'");
      if (m.batteries[it->second].bus >= 0) throw ConfigError("battery '" + id + "' placed on two buses");
      b.battery = it->second;
      m.batteries[it->second].bus = b.id;
    }
    m.buses.push_back(b);
  }

  for (const auto& jl : required<Json>(doc, "lines")) {
    Line ln;
    ln.from_bus = required<int>(jl, "from");
    ln.to_bus = required<int>(jl, "to");
    ln.r = impedance(jl, "r", m.base);
    ln.x = impedance(jl, "x", m.base);
    m.lines.push_back(ln);
  }

  if (doc.contains("fixed_load")) {
    const auto& fl = doc.at("fixed_load");
    const bool kw = fl.contains("p_kw");
    m.forecast.p = matrix(fl.at(kw ? "p_kw" : "p"), "fixed_load.p");
    m.forecast.q = matrix(fl.at(kw ? "q_kvar" : "q"), "fixed_load.q");
    if (kw) {
      for (auto* rows : {&m.forecast.p, &m.forecast.q})
        for (auto& r : *rows)
          for (auto& v : r) v = m.base.power_to_pu(v);
    }
  }
  return m;
}

NetworkModel load_network(const std::string& path) {
  try {
    return network_from_json_text(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string network_to_json_text(const NetworkModel& m) {
  Json doc;
  doc["base"] = {{"S_base_kVA", m.base.s_base_kva}, {"V_base_kV", m.base.v_base_kv}};
  doc["v0_pu"] = std::sqrt(m.nu0);
  doc["v_bounds_pu"] = {std::sqrt(m.nu_min), std::sqrt(m.nu_max)};
  Json bats = Json::array();
  for (const auto& b : m.batteries)
    bats.push_back({{"id", b.id}, {"e_low", b.e_low}, {"e_max", b.e_max}, {"e0", b.e0},
                    {"p_min", b.p_min}, {"p_max", b.p_max}, {"eta", b.eta}});
  doc["batteries"] = bats;
  Json buses = Json::array();
  for (const auto& b : m.buses) {
    Json jb = {{"id", b.id}};
    if (b.has_capacitor) jb["capacitor"] = {{"q_min", b.q_min}, {"q_max", b.q_max}};
    if (b.battery >= 0) jb["battery"] = m.batteries[b.battery].id;
    buses.push_back(jb);
  }
  doc["buses"] = buses;
  Json lines = Json::array();
  for (const auto& ln : m.lines) lines.push_back({{"from", ln.from_bus}, {"to", ln.to_bus}, {"r_pu", ln.r}, {"x_pu", ln.x}});
  doc["lines"] = lines;
  doc["fixed_load"] = {{"p", m.forecast.p}, {"q", m.forecast.q}};
  return doc.dump(1) + "\n";
}

}  // namespace gridshaper
