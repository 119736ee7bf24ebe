#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qscf/run_config.hpp"

namespace qscf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitProtocol = 3;
inline constexpr int kExitEntropy = 4;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // --set key=value
  std::uint64_t seed = 1;
  std::string random_file;  // protocol bits for Alice+Bob (split in half)
  std::string out_path;     // empty = stdout
  std::string format = "json";
  unsigned jobs = 1;
};

// Loads the config, applies overrides, wires up the randomness sources.
RunConfig load_config(const CommonOptions& options);

struct AnalyzeOptions {
  CommonOptions common;
};

struct SimulateOptions {
  CommonOptions common;
  std::uint64_t n_flips = 10000;
  std::string iotable_path;  // also write the simulated detection table
};

struct SweepOptions {
  CommonOptions common;
  std::string kind;  // "sps" | "wcp" | "" = from config
  std::vector<std::uint64_t> k_grid;
  std::vector<double> mu_grid;
  std::optional<double> fixed_a;
};

struct IoTableOptions {
  CommonOptions common;
  bool simulated = false;
  std::uint64_t n_flips = 100000;
};

struct FairnessOptions {
  CommonOptions common;
};

struct PartyOptions {
  CommonOptions common;
  std::string endpoint;        // alice/bob: physics endpoint to connect to
  std::string alice_endpoint;  // physics: where to serve alice
  std::string bob_endpoint;    // physics: where to serve bob
  std::uint64_t n_flips = 1000;
  bool cheat = false;
  int cheat_target = 0;
};

void run_analyze(const AnalyzeOptions& options);
void run_simulate(const SimulateOptions& options);
void run_sweep(const SweepOptions& options);
void run_iotable(const IoTableOptions& options);
void run_fairness(const FairnessOptions& options);
void run_alice_party(const PartyOptions& options);
void run_bob_party(const PartyOptions& options);
void run_physics_party(const PartyOptions& options);

// Runs fn, mapping failures to the documented exit codes.
int guarded(const std::function<void()>& fn);

std::vector<std::uint64_t> default_k_grid();
std::vector<double> default_mu_grid();

}  // namespace qscf::cli
