#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qscf/link_model.hpp"
#include "qscf/photon_source.hpp"
#include "qscf/qubit_states.hpp"
#include "qscf/randomness.hpp"

namespace qscf {

// Where a party's bits come from.
struct RngSpec {
  enum class Mode { Seeded, File };

  Mode mode = Mode::Seeded;
  std::uint64_t seed = 1;
  std::uint64_t stream_id = 0;
  std::string path;                 // File mode
  std::size_t file_byte_begin = 0;  // File mode: byte range, end 0 = EOF
  std::size_t file_byte_end = 0;

  static RngSpec seeded(std::uint64_t seed, std::uint64_t stream_id = 0);
  static RngSpec file(std::string path, std::size_t byte_begin = 0,
                      std::size_t byte_end = 0);
  BitSource open() const;
};

// Protocol randomness (Alice's state choices, Bob's b) is kept separate
// from the channel-simulation randomness so a protocol transcript can be
// replayed against different channel noise.
struct ScenarioRng {
  RngSpec alice;
  RngSpec bob;
  RngSpec physics;

  // Streams 1/2/3 of one master seed; what the CLI --seed flag does.
  static ScenarioRng from_master_seed(std::uint64_t seed);
};

struct ScenarioConfig {
  SourceSpec source;
  LinkBudget link;
  std::uint64_t pulses_per_flip = 1;  // K
  double state_param_a = 0.9;
  double clock_hz = 80e6;
  ScenarioRng rng;

  void validate() const;  // throws std::domain_error / ConfigError
};

struct RngBundle {
  BitSource alice;
  BitSource bob;
  BitSource physics;

  static RngBundle open(const ScenarioRng& spec);
};

enum class FlipKind { Coin, AbortNoDetection, AbortMismatch };

struct FlipOutcome {
  FlipKind kind = FlipKind::AbortNoDetection;
  std::uint64_t j = 0;  // first-detection index in [1, K]; 0 if none
  int coin = -1;        // c_j xor b_j for accepted flips
  StateLabel sent{};
  StateLabel channel{};
  bool dark = false;
  int b = -1;

  // Compact outcome code for digests/logs: '0','1' coin, 'n','m' aborts.
  char code() const;
  bool operator==(const FlipOutcome&) const = default;
};

struct SessionStats {
  std::uint64_t n_flips = 0;
  std::uint64_t n_success = 0;
  std::uint64_t n_abort_nodetect = 0;
  std::uint64_t n_abort_mismatch = 0;
  std::uint64_t n_outcome0 = 0;
  std::uint64_t n_outcome1 = 0;
  double p0_hat = 0.0;  // outcome frequencies over successful flips
  double p1_hat = 0.0;
  double duration_model_s = 0.0;  // n_flips * K / clock_hz
  double rate_hz = 0.0;           // n_success / duration_model_s
  std::uint64_t alice_bits = 0;
  std::uint64_t bob_bits = 0;
  std::uint64_t physics_bits = 0;
  std::uint64_t outcome_digest = 0;  // FNV-1a over per-flip outcome codes

  void add(const FlipOutcome& flip);
  void finalize(const ScenarioConfig& scenario);
};

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 0xcbf29ce484222325ull);

// Per-scenario constants shared by the in-process engine and the networked
// physics process so both consume the channel stream identically:
// exactly three uniforms per flip (first-detection index, dark-vs-signal,
// channel), whether or not a detection occurs.
struct FlipModel {
  std::uint64_t pulses_per_flip = 1;
  double state_param_a = 0.9;
  double p_click = 0.0;
  double log1m_p_click = 0.0;
  double w_dark = 0.0;  // P(dark | click)
  IoTable table;
  std::array<std::array<double, 4>, 4> row_cdf{};

  static FlipModel build(const ScenarioConfig& scenario);

  // First-detection index from one uniform via the geometric law;
  // 0 means no detection within K pulses.
  std::uint64_t first_detection_index(double u) const;

  // Channel of a click from two uniforms (dark-vs-signal, then channel).
  Detection click_channel(StateLabel sent, double u_mix, double u_chan) const;

  // Per-flip randomness footprint, in bits, of each stream. Fixed so that
  // streams can be fast-forwarded to any flip index.
  std::uint64_t alice_bits_per_flip() const { return 2 * pulses_per_flip; }
  static constexpr std::uint64_t kBobBitsPerFlip = 1;
  static constexpr std::uint64_t kPhysicsBitsPerFlip = 3 * 64;
};

// One honest flip. Consumes exactly 2K Alice bits, 1 Bob bit and three
// channel uniforms regardless of outcome; only the first-detection slot is
// simulated in detail.
FlipOutcome run_honest_flip(const FlipModel& model, RngBundle& rng);
FlipOutcome run_honest_flip(const ScenarioConfig& scenario, RngBundle& rng);

// Slow reference path: walks all K slots, sampling each detector slot
// individually. Kept as an independent cross-check of the fast path.
FlipOutcome run_honest_flip_naive(const ScenarioConfig& scenario,
                                  RngBundle& rng);

struct SimulatedIoTable {
  IoTable table;
  std::array<std::uint64_t, 4> detections_per_row{};
  std::uint64_t min_detections = 1000;

  bool row_ok(int row) const { return detections_per_row[row] >= min_detections; }
  bool all_rows_ok() const;
};

struct SessionResult {
  SessionStats stats;
  SimulatedIoTable io;
  std::vector<char> outcome_codes;  // one code per flip, in flip order
};

// A session of n_flips honest flips. jobs > 1 splits the flip range across
// worker threads; the fixed per-flip randomness footprint makes the result
// identical to the sequential run.
SessionResult run_session_full(const ScenarioConfig& scenario,
                               std::uint64_t n_flips, unsigned jobs = 1,
                               bool collect_io = false);
SessionStats run_session(const ScenarioConfig& scenario, std::uint64_t n_flips,
                         unsigned jobs = 1);
// Sequential variant over caller-owned sources.
SessionStats run_session(const ScenarioConfig& scenario, std::uint64_t n_flips,
                         RngBundle& rng);

// Empirical conditional detection table over the detections of n_flips
// honest flips (aborted flips with a detection still count).
SimulatedIoTable simulated_io_table(const ScenarioConfig& scenario,
                                    std::uint64_t n_flips, unsigned jobs = 1);

struct CheatStats {
  std::uint64_t n_flips = 0;
  std::uint64_t n_detected = 0;
  std::uint64_t n_forced = 0;
  double forced_prob = 0.0;  // over flips with a detection

  void finalize();
};

// Bob plays to force desired_bit: he measures in the eigenbasis separating
// the two bit mixtures (correct with probability a for one photon, with
// probability 1 when any pulse of the flip carries two or more), replies
// b = c_hat xor desired_bit, and never aborts. The channel is taken
// lossless, which a cheating Bob can always arrange.
// a is accepted on [0.5, 1] so degenerate controls can be run.
CheatStats run_bob_cheat_session(const PhotonStatistics& stats,
                                 std::uint64_t pulses_per_flip, double a,
                                 int desired_bit, std::uint64_t n_flips,
                                 RngBundle& rng);
CheatStats run_bob_cheat_session(const ScenarioConfig& scenario,
                                 int desired_bit, std::uint64_t n_flips);

}  // namespace qscf
