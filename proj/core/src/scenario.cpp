#include "gridshaper/scenario.hpp"

#include "gridshaper/io.hpp"
#include "json_util.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

namespace gridshaper {

namespace {

using detail::Json;
using detail::int_or;
using detail::number_or;
using detail::required;

namespace fs = std::filesystem;

std::string resolve(const std::string& dir, const std::string& ref) {
  if (ref.empty()) return ref;
  const fs::path p(ref);
  return p.is_absolute() ? ref : (fs::path(dir) / p).lexically_normal().string();
}

PlugRequest request_from_json(const Json& j, const PerUnitBase& base) {
  PlugRequest r;
  const auto kind = required<std::string>(j, "kind");
  r.step = required<int>(j, "step");
  if (kind == "shapeable") {
    r.kind = RequestKind::Shapeable;
    auto& l = r.shapeable;
    l.id = required<std::string>(j, "id");
    l.bus = required<int>(j, "bus");
    l.e = detail::energy(j, "e0", base);
    l.e_low = j.contains("e_low") || j.contains("e_low_kwh") ? detail::energy(j, "e_low", base) : 0.0;
    l.e_max = detail::energy(j, "e_max", base);
    l.e_des = detail::energy(j, "e_des", base);
    l.c_max = detail::power(j, "c_max", base);
    l.eta = number_or(j, "eta", 1.0);
    l.k_in = r.step;
    l.k_out = required<int>(j, "k_out");
  } else if (kind == "deferrable") {
    r.kind = RequestKind::Deferrable;
    auto& d = r.deferrable;
    d.id = required<std::string>(j, "id");
    d.bus = required<int>(j, "bus");
    if (j.contains("profile_kw")) {
      for (double v : required<std::vector<double>>(j, "profile_kw")) d.profile.push_back(base.power_to_pu(v));
    } else {
      d.profile = required<std::vector<double>>(j, "profile");
    }
    d.eta = number_or(j, "eta", 1.0);
    d.request_step = r.step;
    d.d_max = required<int>(j, "d_max");
  } else {
    throw ConfigError("unknown request kind '" + kind + "'");
  }
  return r;
}

Json request_to_json(const PlugRequest& r) {
  Json j;
  j["kind"] = to_string(r.kind);
  j["id"] = r.id();
  j["bus"] = r.bus();
  j["step"] = r.step;
  if (r.kind == RequestKind::Shapeable) {
    const auto& l = r.shapeable;
    j["e0"] = l.e;
    j["e_low"] = l.e_low;
    j["e_max"] = l.e_max;
    j["e_des"] = l.e_des;
    j["c_max"] = l.c_max;
    j["eta"] = l.eta;
    j["k_out"] = l.k_out;
  } else {
    j["profile"] = r.deferrable.profile;
    j["eta"] = r.deferrable.eta;
    j["d_max"] = r.deferrable.d_max;
  }
  return j;
}

std::vector<double> weight_vector(const Json& w, const std::string& key, std::vector<double> fallback) {
  if (!w.contains(key)) return fallback;
  const Json& v = w.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) return required<std::vector<double>>(w, key);
  throw ConfigError("weight '" + key + "' must be a number or an array");
}

std::vector<double> read_price_file(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<double> out;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    const Json j = detail::parse_json(text);
    if (!j.is_array()) throw ConfigError(path + ": price file must hold an array");
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find_last_of(',');
    const std::string cell = pos == std::string::npos ? line : line.substr(pos + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      out.push_back(v);
    } catch (const std::exception&) {
      // header or blank line
    }
  }
  if (out.empty()) throw ConfigError(path + ": no prices found");
  return out;
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text, const PerUnitBase& base) {
  const Json j = detail::parse_json(text);
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario s;
  if (j.contains("network")) s.network_file = required<std::string>(j, "network");
  if (j.contains("config")) s.config_file = required<std::string>(j, "config");
  s.total_steps = int_or(j, "total_steps", 60);
  s.seed = j.contains("seed") ? required<std::uint64_t>(j, "seed") : 0;
  if (j.contains("requests")) {
    if (!j.at("requests").is_array()) throw ConfigError("'requests' must be an array");
    int i = 0;
    for (const auto& r : j.at("requests")) {
      try {
        s.requests.push_back(request_from_json(r, base));
      } catch (const ConfigError& e) {
        throw ConfigError("request " + std::to_string(i) + ": " + e.what());
      }
      ++i;
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path, const PerUnitBase& base) {
  Scenario s;
  try {
    s = scenario_from_json_text(read_text_file(path), base);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + what);
  }
  const std::string dir = fs::path(path).parent_path().string();
  s.network_file = resolve(dir.empty() ? "." : dir, s.network_file);
  s.config_file = resolve(dir.empty() ? "." : dir, s.config_file);
  return s;
}

std::string scenario_to_json_text(const Scenario& s) {
  Json j;
  if (!s.network_file.empty()) j["network"] = s.network_file;
  if (!s.config_file.empty()) j["config"] = s.config_file;
  j["total_steps"] = s.total_steps;
  j["seed"] = s.seed;
  j["requests"] = Json::array();
  for (const auto& r : s.requests) j["requests"].push_back(request_to_json(r));
  return j.dump(2) + "\n";
}

std::vector<std::string> validate_scenario(const Scenario& s, const NetworkModel& model, const HorizonConfig& horizon) {
  std::vector<std::string> issues;
  if (s.total_steps <= 0) issues.push_back("total_steps must be positive");
  std::set<std::string> ids;
  for (const auto& r : s.requests) {
    if (!ids.insert(r.id()).second) issues.push_back("duplicate request id '" + r.id() + "'");
    if (r.step >= s.total_steps)
      issues.push_back("request '" + r.id() + "' at step " + std::to_string(r.step) + " is after the run ends");
    if (auto p = validate_request(r, model, horizon); !p.empty()) issues.push_back(p);
  }
  return issues;
}

ControllerConfig config_from_json_text(const std::string& text, const std::string& dir) {
  const Json j = detail::parse_json(text);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ControllerConfig c;
  c.horizon.dt = number_or(j, "dt_hours", c.horizon.dt);
  c.horizon.N = int_or(j, "N", c.horizon.N);
  c.horizon.N_r = int_or(j, "N_r", c.horizon.N_r);
  c.horizon.validate();
  if (j.contains("weights")) {
    const Json& w = j.at("weights");
    c.weights.T1 = weight_vector(w, "T1", c.weights.T1);
    c.weights.T2 = weight_vector(w, "T2", c.weights.T2);
    c.weights.T3 = weight_vector(w, "T3", c.weights.T3);
  }
  if (j.contains("nu_nom") && !j.at("nu_nom").is_null()) c.nu_nom = number_or(j, "nu_nom", 1.0);
  c.loss_weight = number_or(j, "loss_weight", c.loss_weight);
  if (c.loss_weight < 0.0) throw ConfigError("loss_weight must be nonnegative");
  if (j.contains("embed_lemma_rows")) c.embed_lemma_rows = required<bool>(j, "embed_lemma_rows");

  const int len = static_cast<int>(std::lround(24.0 / c.horizon.dt));
  c.price = PriceSignal::time_of_use(c.horizon.dt, std::max(len, 1));
  if (j.contains("price")) {
    const Json& p = j.at("price");
    const auto type = required<std::string>(p, "type");
    if (type == "tou") {
      c.price = PriceSignal::time_of_use(c.horizon.dt, std::max(len, 1), number_or(p, "offpeak", 1.0),
                                         number_or(p, "peak", 3.0), number_or(p, "peak_start_h", 16.0),
                                         number_or(p, "peak_end_h", 21.0));
    } else if (type == "array") {
      c.price.lambda = required<std::vector<double>>(p, "values");
    } else if (type == "file") {
      c.price.lambda = read_price_file(resolve(dir, required<std::string>(p, "path")));
    } else {
      throw ConfigError("unknown price type '" + type + "'");
    }
    if (c.price.lambda.empty()) throw ConfigError("price signal is empty");
    for (double v : c.price.lambda)
      if (!std::isfinite(v)) throw ConfigError("price signal has a non-finite entry");
  }
  return c;
}

ControllerConfig load_config(const std::string& path) {
  const std::string dir = fs::path(path).parent_path().string();
  try {
    return config_from_json_text(read_text_file(path), dir.empty() ? "." : dir);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + what);
  }
}

Scenario generate_scenario(std::uint64_t seed, const NetworkModel& model, const GeneratorParams& g) {
  if (model.num_buses() < 2) throw ConfigError("network needs at least one load bus");
  if (g.total_steps <= 0 || !(g.dt > 0.0)) throw ConfigError("generator needs positive steps and dt");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::poisson_distribution<int> shp_arrivals(std::max(0.0, g.shapeable_rate * g.dt));
  std::poisson_distribution<int> def_arrivals(std::max(0.0, g.deferrable_rate * g.dt));
  // round to keep generated files short and stable
  auto round6 = [](double v) { return std::round(v * 1e6) / 1e6; };

  Scenario s;
  s.total_steps = g.total_steps;
  s.seed = seed;
  const int last = std::min(g.last_departure, g.total_steps);
  int n_shp = 0, n_def = 0;
  for (int k = 0; k < g.total_steps; ++k) {
    const int shp = g.shapeable_rate > 0.0 ? shp_arrivals(rng) : 0;
    const int def = g.deferrable_rate > 0.0 ? def_arrivals(rng) : 0;
    for (int a = 0; a < shp; ++a) {
      PlugRequest r;
      r.kind = RequestKind::Shapeable;
      r.step = k;
      auto& l = r.shapeable;
      l.id = "S" + std::to_string(++n_shp);
      l.bus = uniform_int(1, model.num_buses() - 1);
      l.e = round6(uniform(g.e0_min, g.e0_max));
      l.e_low = 0.0;
      l.e_des = round6(l.e + uniform(g.need_min, g.need_max));
      l.e_max = std::max(1.0, l.e_des);
      l.c_max = round6(uniform(g.c_max_min, g.c_max_max));
      l.eta = g.eta;
      l.k_in = k;
      const int fastest = static_cast<int>(std::ceil((l.e_des - l.e) / (l.eta * l.c_max * g.dt) - 1e-9));
      l.k_out = std::min(k + fastest + uniform_int(g.slack_min, g.slack_max), last);
      if (k + fastest > l.k_out) continue;  // would be rejected outright
      s.requests.push_back(r);
    }
    for (int a = 0; a < def; ++a) {
      PlugRequest r;
      r.kind = RequestKind::Deferrable;
      r.step = k;
      auto& d = r.deferrable;
      d.id = "D" + std::to_string(++n_def);
      d.bus = uniform_int(1, model.num_buses() - 1);
      const int len = uniform_int(g.profile_len_min, g.profile_len_max);
      d.profile.assign(len, round6(uniform(g.profile_power_min, g.profile_power_max)));
      d.request_step = k;
      d.d_max = g.d_max;
      if (k + g.d_max + len > last) continue;
      s.requests.push_back(r);
    }
  }
  return s;
}

}  // namespace gridshaper
