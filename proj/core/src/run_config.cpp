#include "qscf/run_config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "qscf/errors.hpp"

namespace qscf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) {
      throw ConfigError("trailing characters after number in '" + key + " = " +
                        value + "'");
    }
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number for key '" + key + "': " + value);
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) {
    throw ConfigError("key '" + key + "' must be a positive integer, got " +
                      value);
  }
  return static_cast<std::uint64_t>(v);
}

void assign(RunConfig& config, const std::string& key,
            const std::string& value) {
  ScenarioConfig& sc = config.scenario;
  if (key == "source_kind") {
    if (value == "sps") {
      sc.source.kind = SourceKind::Sps;
    } else if (value == "wcp") {
      sc.source.kind = SourceKind::Wcp;
    } else {
      throw ConfigError("source_kind must be 'sps' or 'wcp', got '" + value +
                        "'");
    }
  } else if (key == "mu") {
    sc.source.mu = parse_number(key, value);
  } else if (key == "g2") {
    sc.source.g2 = parse_number(key, value);
  } else if (key == "loss_db") {
    sc.link.loss_db = parse_number(key, value);
  } else if (key == "eta_bob") {
    sc.link.eta_bob = parse_number(key, value);
  } else if (key == "eta_det") {
    sc.link.eta_det = parse_number(key, value);
  } else if (key == "p_dark") {
    sc.link.p_dark = parse_number(key, value);
  } else if (key == "qber") {
    sc.link.qber = parse_number(key, value);
  } else if (key == "pulses_per_flip") {
    sc.pulses_per_flip = parse_count(key, value);
  } else if (key == "state_param_a") {
    sc.state_param_a = parse_number(key, value);
  } else if (key == "clock_hz") {
    sc.clock_hz = parse_number(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

const char* kRequiredKeys[] = {"source_kind",     "mu",       "eta_bob",
                               "eta_det",         "p_dark",   "qber",
                               "pulses_per_flip", "state_param_a",
                               "clock_hz"};

}  // namespace

RunConfig parse_run_config(const std::string& text,
                           const std::string& origin) {
  RunConfig config;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key or value");
    }
    if (seen[key]) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    seen[key] = true;
    try {
      assign(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  for (const char* key : kRequiredKeys) {
    if (!seen[key]) {
      throw ConfigError(origin + ": missing required key '" +
                        std::string(key) + "'");
    }
  }
  if (config.scenario.source.kind == SourceKind::Sps && !seen["g2"]) {
    throw ConfigError(origin + ": sps source requires key 'g2'");
  }
  if (config.scenario.source.kind == SourceKind::Wcp) {
    config.scenario.source.g2 = 0.0;
  }
  try {
    config.scenario.validate();
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  assign(config, key, value);
  if (config.scenario.source.kind == SourceKind::Wcp) {
    config.scenario.source.g2 = 0.0;
  }
  try {
    config.scenario.validate();
  } catch (const std::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string scenario_to_text(const ScenarioConfig& sc) {
  std::string text;
  text += "source_kind = ";
  text += sc.source.kind == SourceKind::Sps ? "sps" : "wcp";
  text += "\nmu = " + num(sc.source.mu);
  if (sc.source.kind == SourceKind::Sps) {
    text += "\ng2 = " + num(sc.source.g2);
  }
  text += "\nloss_db = " + num(sc.link.loss_db);
  text += "\neta_bob = " + num(sc.link.eta_bob);
  text += "\neta_det = " + num(sc.link.eta_det);
  text += "\np_dark = " + num(sc.link.p_dark);
  text += "\nqber = " + num(sc.link.qber);
  text += "\npulses_per_flip = " + std::to_string(sc.pulses_per_flip);
  text += "\nstate_param_a = " + num(sc.state_param_a);
  text += "\nclock_hz = " + num(sc.clock_hz);
  text += "\n";
  return text;
}

std::string scenario_hash_hex(const ScenarioConfig& sc) {
  const std::string text = scenario_to_text(sc);
  const std::uint64_t h = fnv1a64(text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& sc) {
  nlohmann::ordered_json j;
  j["source_kind"] = sc.source.kind == SourceKind::Sps ? "sps" : "wcp";
  j["mu"] = sc.source.mu;
  if (sc.source.kind == SourceKind::Sps) j["g2"] = sc.source.g2;
  j["loss_db"] = sc.link.loss_db;
  j["eta_bob"] = sc.link.eta_bob;
  j["eta_det"] = sc.link.eta_det;
  j["p_dark"] = sc.link.p_dark;
  j["qber"] = sc.link.qber;
  j["pulses_per_flip"] = sc.pulses_per_flip;
  j["state_param_a"] = sc.state_param_a;
  j["clock_hz"] = sc.clock_hz;
  return j;
}

}  // namespace qscf
