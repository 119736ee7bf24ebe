#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "qscf/protocol_engine.hpp"

namespace qscf {

// A run configuration is a scenario loaded from a flat key = value file.
// Keys carry their units (loss_db, clock_hz). Unknown keys are rejected.
struct RunConfig {
  ScenarioConfig scenario;
};

// Parses a config file. '#' starts a comment; blank lines are ignored.
// Recognized keys:
//   source_kind   sps | wcp
//   mu            mean photon number per pulse
//   g2            anti-bunching value (sps; ignored for wcp)
//   loss_db       channel attenuation
//   eta_bob       receiver transmission
//   eta_det       detector efficiency
//   p_dark        dark-count probability per pulse slot
//   qber          same-basis error ratio
//   pulses_per_flip   K
//   state_param_a     a
//   clock_hz          system clock rate
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);

// key=value override, same keys as the file (CLI --set).
void apply_override(RunConfig& config, const std::string& assignment);

// Canonical flat rendering of the physical scenario (excludes randomness
// sources); basis of the scenario hash the parties compare in HELLO.
std::string scenario_to_text(const ScenarioConfig& scenario);
std::string scenario_hash_hex(const ScenarioConfig& scenario);

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& scenario);

}  // namespace qscf
