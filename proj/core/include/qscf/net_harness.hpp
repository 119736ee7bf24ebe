#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qscf/protocol_engine.hpp"

namespace qscf::net {

inline constexpr int kWireVersion = 1;

enum class FrameType {
  Hello,
  PulseBlock,
  Detection,
  Challenge,
  Reveal,
  Verdict,
  Abort,
  Stats,
};

std::string_view frame_type_name(FrameType type);

// One newline-delimited frame. Within a flip the order is
// PULSE_BLOCK -> DETECTION -> CHALLENGE -> REVEAL -> VERDICT, where
// CHALLENGE/REVEAL are skipped when there was no detection. round_id never
// decreases within a session.
struct WireFrame {
  int v = kWireVersion;
  FrameType type = FrameType::Hello;
  std::uint64_t round_id = 0;
  nlohmann::ordered_json payload;  // type-specific fields

  bool operator==(const WireFrame& other) const {
    return v == other.v && type == other.type && round_id == other.round_id &&
           payload == other.payload;
  }
};

// One frame per line, UTF-8 JSON. Throws ProtocolError on malformed input.
std::string encode_frame(const WireFrame& frame);
WireFrame decode_frame(const std::string& line);

// 2 bits per pulse (alpha then c), packed MSB-first, hex-encoded.
std::string pack_labels(const std::vector<StateLabel>& labels);
std::vector<StateLabel> unpack_labels(const std::string& hex,
                                      std::uint64_t count);

// Blocking, reliable, ordered byte stream carrying one frame per line.
class LineStream {
 public:
  virtual ~LineStream() = default;
  virtual void write_line(const std::string& line) = 0;
  // nullopt on orderly end of stream.
  virtual std::optional<std::string> read_line() = 0;
  virtual void close() = 0;
};

// In-memory duplex pipe: two connected ends, each usable from one thread.
std::pair<std::unique_ptr<LineStream>, std::unique_ptr<LineStream>>
make_pipe();

// TCP ("host:port") or unix-domain ("unix:/path") stream sockets.
std::unique_ptr<LineStream> connect_endpoint(const std::string& endpoint);

class Listener {
 public:
  explicit Listener(const std::string& endpoint);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::unique_ptr<LineStream> accept_one();
  // Actual endpoint after binding (resolves port 0 to the assigned port).
  std::string bound_endpoint() const { return bound_; }

 private:
  int fd_ = -1;
  std::string bound_;
  std::string unix_path_;
};

// Called on every frame the physics process moves, for inspection in tests.
// leg is one of "a->p", "p->a", "b->p", "p->b".
using FrameTap = std::function<void(std::string_view leg, const WireFrame&)>;

struct PartySummary {
  std::string role;
  std::uint64_t n_flips = 0;
  std::uint64_t n_success = 0;
  std::uint64_t n_abort_nodetect = 0;
  std::uint64_t n_abort_mismatch = 0;
  std::uint64_t n_outcome0 = 0;
  std::uint64_t n_outcome1 = 0;
  std::uint64_t bits_consumed = 0;
  std::uint64_t outcome_digest = 0;
  std::vector<char> outcome_codes;  // one per flip: '0','1','n','m'

  nlohmann::ordered_json to_json() const;
};

struct PhysicsSummary {
  std::uint64_t rounds_served = 0;
  std::uint64_t n_detection = 0;
  std::uint64_t n_no_detection = 0;
  bool clean_finish = false;
  std::string note;
  nlohmann::ordered_json alice_stats;
  nlohmann::ordered_json bob_stats;

  nlohmann::ordered_json to_json() const;
};

// Trusted simulator of the quantum channel: receives Alice's pulse blocks,
// samples detections for Bob, and relays the classical frames between the
// parties. It never forwards Alice's labels to Bob nor Bob's detection
// channel back to Alice.
PhysicsSummary serve_physics(const ScenarioConfig& scenario,
                             std::uint64_t n_flips, LineStream& alice,
                             LineStream& bob, const FrameTap& tap = {});

PartySummary run_alice(LineStream& physics, const ScenarioConfig& scenario,
                       std::uint64_t n_flips, BitSource bits);

struct BobOptions {
  bool cheat = false;
  int cheat_target = 0;
};

PartySummary run_bob(LineStream& physics, const ScenarioConfig& scenario,
                     std::uint64_t n_flips, BitSource bits,
                     const BobOptions& options = {});

struct LocalNetResult {
  PartySummary alice;
  PartySummary bob;
  PhysicsSummary physics;
};

// Three-party session over in-memory pipes, one thread per role.
LocalNetResult run_local_session(const ScenarioConfig& scenario,
                                 std::uint64_t n_flips,
                                 const BobOptions& bob_options = {},
                                 const FrameTap& tap = {});

}  // namespace qscf::net
