#pragma once

#include "gridshaper/errors.hpp"
#include "gridshaper/network.hpp"
#include "json.hpp"

#include <string>

namespace gridshaper::detail {

using Json = nlohmann::json;

inline Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

template <class T>
T required(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

inline double number_or(const Json& j, const std::string& key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number()) throw ConfigError("field '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline int int_or(const Json& j, const std::string& key, int fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError("field '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

// `key` in p.u.-hours, or `key`_kwh converted with the base.
inline double energy(const Json& j, const std::string& key, const PerUnitBase& base) {
  if (j.contains(key + "_kwh")) return base.energy_to_pu(required<double>(j, key + "_kwh"));
  return required<double>(j, key);
}

// `key` in p.u., or `key`_kw / `key`_kvar converted with the base.
inline double power(const Json& j, const std::string& key, const PerUnitBase& base) {
  if (j.contains(key + "_kw")) return base.power_to_pu(required<double>(j, key + "_kw"));
  if (j.contains(key + "_kvar")) return base.power_to_pu(required<double>(j, key + "_kvar"));
  return required<double>(j, key);
}

}  // namespace gridshaper::detail
