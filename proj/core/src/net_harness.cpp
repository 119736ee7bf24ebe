#include "qscf/net_harness.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>

#include "qscf/errors.hpp"
#include "qscf/run_config.hpp"

namespace qscf::net {

using nlohmann::ordered_json;

std::string_view frame_type_name(FrameType type) {
  switch (type) {
    case FrameType::Hello: return "HELLO";
    case FrameType::PulseBlock: return "PULSE_BLOCK";
    case FrameType::Detection: return "DETECTION";
    case FrameType::Challenge: return "CHALLENGE";
    case FrameType::Reveal: return "REVEAL";
    case FrameType::Verdict: return "VERDICT";
    case FrameType::Abort: return "ABORT";
    case FrameType::Stats: return "STATS";
  }
  return "?";
}

namespace {

FrameType frame_type_from_name(const std::string& name) {
  for (FrameType t : {FrameType::Hello, FrameType::PulseBlock,
                      FrameType::Detection, FrameType::Challenge,
                      FrameType::Reveal, FrameType::Verdict, FrameType::Abort,
                      FrameType::Stats}) {
    if (name == frame_type_name(t)) return t;
  }
  throw ProtocolError("unknown frame type tag '" + name + "'");
}

}  // namespace

std::string encode_frame(const WireFrame& frame) {
  ordered_json j;
  j["v"] = frame.v;
  j["type"] = frame_type_name(frame.type);
  j["round"] = frame.round_id;
  for (auto it = frame.payload.begin(); it != frame.payload.end(); ++it) {
    j[it.key()] = it.value();
  }
  return j.dump();
}

WireFrame decode_frame(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("frame is not a JSON object");
  if (!j.contains("v") || !j["v"].is_number_integer()) {
    throw ProtocolError("frame missing version field");
  }
  WireFrame f;
  f.v = j["v"].get<int>();
  if (f.v != kWireVersion) {
    throw ProtocolError("unsupported wire version " + std::to_string(f.v));
  }
  if (!j.contains("type") || !j["type"].is_string()) {
    throw ProtocolError("frame missing type field");
  }
  f.type = frame_type_from_name(j["type"].get<std::string>());
  if (!j.contains("round") || !j["round"].is_number_unsigned()) {
    throw ProtocolError("frame missing round field");
  }
  f.round_id = j["round"].get<std::uint64_t>();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "v" || it.key() == "type" || it.key() == "round") continue;
    f.payload[it.key()] = it.value();
  }
  return f;
}

std::string pack_labels(const std::vector<StateLabel>& labels) {
  std::vector<std::uint8_t> bytes((labels.size() * 2 + 7) / 8, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t abit = 2 * i;
    const std::size_t cbit = 2 * i + 1;
    if (labels[i].alpha) bytes[abit >> 3] |= std::uint8_t(0x80u >> (abit & 7));
    if (labels[i].c) bytes[cbit >> 3] |= std::uint8_t(0x80u >> (cbit & 7));
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::vector<StateLabel> unpack_labels(const std::string& hex,
                                      std::uint64_t count) {
  const std::size_t need_bytes = (count * 2 + 7) / 8;
  if (hex.size() != need_bytes * 2) {
    throw ProtocolError("pulse block length mismatch: got " +
                        std::to_string(hex.size()) + " hex chars, expected " +
                        std::to_string(need_bytes * 2));
  }
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw ProtocolError("pulse block contains a non-hex character");
  };
  std::vector<std::uint8_t> bytes(need_bytes);
  for (std::size_t i = 0; i < need_bytes; ++i) {
    bytes[i] = std::uint8_t(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  std::vector<StateLabel> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t abit = 2 * i;
    const std::size_t cbit = 2 * i + 1;
    labels[i].alpha = (bytes[abit >> 3] >> (7 - (abit & 7))) & 1;
    labels[i].c = (bytes[cbit >> 3] >> (7 - (cbit & 7))) & 1;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// streams

namespace {

struct PipeCore {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> queue[2];  // [0] a->b, [1] b->a
  bool closed[2] = {false, false};
};

class PipeEnd final : public LineStream {
 public:
  PipeEnd(std::shared_ptr<PipeCore> core, int side)
      : core_(std::move(core)), side_(side) {}
  ~PipeEnd() override { PipeEnd::close(); }

  void write_line(const std::string& line) override {
    std::lock_guard lock(core_->mu);
    if (core_->closed[side_]) {
      throw ProtocolError("write on closed pipe");
    }
    // Writes to a departed peer are dropped so teardown stays orderly.
    if (!core_->closed[1 - side_]) {
      core_->queue[side_].push_back(line);
      core_->cv.notify_all();
    }
  }

  std::optional<std::string> read_line() override {
    std::unique_lock lock(core_->mu);
    auto& in = core_->queue[1 - side_];
    core_->cv.wait(lock, [&] {
      return !in.empty() || core_->closed[1 - side_] || core_->closed[side_];
    });
    if (!in.empty()) {
      std::string line = std::move(in.front());
      in.pop_front();
      return line;
    }
    return std::nullopt;
  }

  void close() override {
    std::lock_guard lock(core_->mu);
    core_->closed[side_] = true;
    core_->cv.notify_all();
  }

 private:
  std::shared_ptr<PipeCore> core_;
  int side_;
};

class FdStream final : public LineStream {
 public:
  explicit FdStream(int fd) : fd_(fd) {}
  ~FdStream() override { FdStream::close(); }

  void write_line(const std::string& line) override {
    std::string data = line;
    data.push_back('\n');
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n =
          ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        throw ProtocolError(std::string("socket write failed: ") +
                            std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line() override {
    while (true) {
      const std::size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == ECONNRESET) return std::nullopt;  // abrupt peer death
        throw ProtocolError(std::string("socket read failed: ") +
                            std::strerror(errno));
      }
      if (n == 0) {
        if (!buffer_.empty()) {
          // Deliver the truncated tail; decoding it reports the error.
          std::string line = std::move(buffer_);
          buffer_.clear();
          return line;
        }
        return std::nullopt;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

bool is_unix_endpoint(const std::string& endpoint) {
  return endpoint.rfind("unix:", 0) == 0;
}

int connect_tcp(const std::string& endpoint) {
  const std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    throw ConfigError("endpoint must be host:port or unix:/path, got '" +
                      endpoint + "'");
  }
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw ProtocolError("cannot resolve endpoint '" + endpoint +
                        "': " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw ProtocolError("cannot connect to '" + endpoint +
                        "': " + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

int connect_unix(const std::string& path) {
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) {
    throw ProtocolError(std::string("socket() failed: ") +
                        std::strerror(errno));
  }
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    ::close(fd);
    throw ConfigError("unix socket path too long: " + path);
  }
  std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw ProtocolError("cannot connect to 'unix:" + path +
                        "': " + std::strerror(errno));
  }
  return fd;
}

}  // namespace

std::pair<std::unique_ptr<LineStream>, std::unique_ptr<LineStream>>
make_pipe() {
  auto core = std::make_shared<PipeCore>();
  return {std::make_unique<PipeEnd>(core, 0),
          std::make_unique<PipeEnd>(core, 1)};
}

std::unique_ptr<LineStream> connect_endpoint(const std::string& endpoint) {
  if (is_unix_endpoint(endpoint)) {
    return std::make_unique<FdStream>(connect_unix(endpoint.substr(5)));
  }
  return std::make_unique<FdStream>(connect_tcp(endpoint));
}

Listener::Listener(const std::string& endpoint) {
  if (is_unix_endpoint(endpoint)) {
    unix_path_ = endpoint.substr(5);
    ::unlink(unix_path_.c_str());
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd_ < 0) {
      throw ProtocolError(std::string("socket() failed: ") +
                          std::strerror(errno));
    }
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (unix_path_.size() >= sizeof addr.sun_path) {
      throw ConfigError("unix socket path too long: " + unix_path_);
    }
    std::strncpy(addr.sun_path, unix_path_.c_str(), sizeof addr.sun_path - 1);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd_, 4) != 0) {
      throw ProtocolError("cannot listen on '" + endpoint +
                          "': " + std::strerror(errno));
    }
    bound_ = endpoint;
    return;
  }
  const std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    throw ConfigError("endpoint must be host:port or unix:/path, got '" +
                      endpoint + "'");
  }
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                               port.c_str(), &hints, &res);
  if (rc != 0) {
    throw ProtocolError("cannot resolve endpoint '" + endpoint +
                        "': " + gai_strerror(rc));
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw ProtocolError(std::string("socket() failed: ") +
                        std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 ||
      ::listen(fd_, 4) != 0) {
    ::freeaddrinfo(res);
    throw ProtocolError("cannot listen on '" + endpoint +
                        "': " + std::strerror(errno));
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  char ip[64];
  ::inet_ntop(AF_INET, &bound.sin_addr, ip, sizeof ip);
  bound_ = std::string(ip) + ":" + std::to_string(ntohs(bound.sin_port));
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
  if (!unix_path_.empty()) ::unlink(unix_path_.c_str());
}

std::unique_ptr<LineStream> Listener::accept_one() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) {
    throw ProtocolError(std::string("accept() failed: ") +
                        std::strerror(errno));
  }
  return std::make_unique<FdStream>(fd);
}

// ---------------------------------------------------------------------------
// party state machines

namespace {

// End of stream, as opposed to a protocol violation on a live stream.
struct PeerDisconnected : ProtocolError {
  PeerDisconnected() : ProtocolError("peer disconnected") {}
};

void send_frame(LineStream& stream, const WireFrame& frame) {
  stream.write_line(encode_frame(frame));
}

WireFrame recv_frame(LineStream& stream) {
  const auto line = stream.read_line();
  if (!line) {
    throw PeerDisconnected();
  }
  return decode_frame(*line);
}

WireFrame expect_frame(LineStream& stream, FrameType type,
                       std::uint64_t round) {
  WireFrame f = recv_frame(stream);
  if (f.type == FrameType::Abort) {
    throw ProtocolError("peer aborted session: " +
                        f.payload.value("reason", std::string("unspecified")));
  }
  if (f.type != type || f.round_id != round) {
    throw ProtocolError(
        std::string("out-of-order frame: expected ") +
        std::string(frame_type_name(type)) + "/" + std::to_string(round) +
        ", got " + std::string(frame_type_name(f.type)) + "/" +
        std::to_string(f.round_id));
  }
  return f;
}

int payload_bit(const WireFrame& f, const char* key) {
  if (!f.payload.contains(key) || !f.payload[key].is_number_integer()) {
    throw ProtocolError(std::string("frame field '") + key +
                        "' missing or not an integer");
  }
  const int v = f.payload[key].get<int>();
  if (v != 0 && v != 1) {
    throw ProtocolError(std::string("frame field '") + key +
                        "' must be 0 or 1");
  }
  return v;
}

ordered_json party_stats_json(const PartySummary& s) {
  ordered_json j;
  j["flips"] = s.n_flips;
  j["success"] = s.n_success;
  j["abort_nodetect"] = s.n_abort_nodetect;
  j["abort_mismatch"] = s.n_abort_mismatch;
  j["outcome0"] = s.n_outcome0;
  j["outcome1"] = s.n_outcome1;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(s.outcome_digest));
  j["digest"] = digest;
  return j;
}

void record_outcome(PartySummary& s, char code) {
  ++s.n_flips;
  s.outcome_codes.push_back(code);
  switch (code) {
    case '0':
      ++s.n_success;
      ++s.n_outcome0;
      break;
    case '1':
      ++s.n_success;
      ++s.n_outcome1;
      break;
    case 'n':
      ++s.n_abort_nodetect;
      break;
    case 'm':
      ++s.n_abort_mismatch;
      break;
    default:
      throw std::logic_error("bad outcome code");
  }
}

void finish_summary(PartySummary& s) {
  s.outcome_digest = fnv1a64(s.outcome_codes.data(), s.outcome_codes.size());
}

struct CheatPlan {
  bool detected = false;
  std::uint64_t j = 0;
  int c_hat = 0;
};

// Mirrors run_bob_cheat_session's sampling for the networked cheat mode.
CheatPlan sample_cheat_detection(const PhotonStatistics& stats,
                                 std::uint64_t k, double a,
                                 const std::vector<StateLabel>& labels,
                                 BitSource& rng) {
  const double pm_slot = prob_multiphoton(stats);
  const double p_multi_seq =
      1.0 - std::exp(static_cast<double>(k) * std::log1p(-pm_slot));
  const double p01 = stats.p0 + stats.p1;
  const double p_none_given_single =
      p01 > 0.0
          ? std::exp(static_cast<double>(k) *
                     (std::log(stats.p0) - std::log(p01)))
          : 0.0;
  CheatPlan plan;
  const bool multi = rng.uniform01() < p_multi_seq;
  double p_correct = 1.0;
  if (multi) {
    plan.detected = true;
  } else {
    plan.detected =
        stats.p0 < 1.0 && rng.uniform01() < 1.0 - p_none_given_single;
    p_correct = a;
  }
  if (!plan.detected) return plan;
  const double u_j = rng.uniform01();
  plan.j = 1 + std::min<std::uint64_t>(
                   k - 1, static_cast<std::uint64_t>(u_j * double(k)));
  const int c = labels[plan.j - 1].c;
  plan.c_hat = c;
  if (p_correct < 1.0 && !(rng.uniform01() < p_correct)) {
    plan.c_hat = 1 - c;
  }
  return plan;
}

}  // namespace

nlohmann::ordered_json PartySummary::to_json() const {
  ordered_json j;
  j["role"] = role;
  j["n_flips"] = n_flips;
  j["n_success"] = n_success;
  j["n_abort_nodetect"] = n_abort_nodetect;
  j["n_abort_mismatch"] = n_abort_mismatch;
  j["n_outcome0"] = n_outcome0;
  j["n_outcome1"] = n_outcome1;
  j["p0_hat"] = n_success ? double(n_outcome0) / double(n_success) : 0.0;
  j["p1_hat"] = n_success ? double(n_outcome1) / double(n_success) : 0.0;
  j["bits_consumed"] = bits_consumed;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(outcome_digest));
  j["outcome_digest"] = digest;
  return j;
}

nlohmann::ordered_json PhysicsSummary::to_json() const {
  ordered_json j;
  j["role"] = "physics";
  j["rounds_served"] = rounds_served;
  j["n_detection"] = n_detection;
  j["n_no_detection"] = n_no_detection;
  j["clean_finish"] = clean_finish;
  if (!note.empty()) j["note"] = note;
  if (!alice_stats.is_null()) j["alice_stats"] = alice_stats;
  if (!bob_stats.is_null()) j["bob_stats"] = bob_stats;
  return j;
}

PhysicsSummary serve_physics(const ScenarioConfig& scenario,
                             std::uint64_t n_flips, LineStream& alice,
                             LineStream& bob, const FrameTap& tap) {
  scenario.validate();
  const std::string hash = scenario_hash_hex(scenario);
  const std::uint64_t k = scenario.pulses_per_flip;
  const FlipModel model = FlipModel::build(scenario);
  const PhotonStatistics stats = photon_statistics(scenario.source);
  BitSource physics_rng = scenario.rng.physics.open();

  auto recv_tapped = [&](LineStream& s, const char* leg) {
    WireFrame f = recv_frame(s);
    if (tap) tap(leg, f);
    return f;
  };
  auto send_tapped = [&](LineStream& s, const char* leg, const WireFrame& f) {
    if (tap) tap(leg, f);
    send_frame(s, f);
  };
  auto abort_both = [&](const std::string& reason) {
    WireFrame f;
    f.type = FrameType::Abort;
    f.payload["reason"] = reason;
    try {
      send_tapped(alice, "p->a", f);
    } catch (const ProtocolError&) {
    }
    try {
      send_tapped(bob, "p->b", f);
    } catch (const ProtocolError&) {
    }
  };

  PhysicsSummary summary;

  // HELLO from both parties; either bad hash rejects the session.
  bool bob_cheats = false;
  try {
    const WireFrame ha = recv_tapped(alice, "a->p");
    if (ha.type != FrameType::Hello ||
        ha.payload.value("role", std::string()) != "alice") {
      throw ProtocolError("expected HELLO from alice");
    }
    const WireFrame hb = recv_tapped(bob, "b->p");
    if (hb.type != FrameType::Hello ||
        hb.payload.value("role", std::string()) != "bob") {
      throw ProtocolError("expected HELLO from bob");
    }
    for (const WireFrame* h : {&ha, &hb}) {
      if (h->payload.value("scenario", std::string()) != hash) {
        throw ProtocolError("scenario hash mismatch in HELLO from " +
                            h->payload.value("role", std::string("?")));
      }
      if (h->payload.value("flips", std::uint64_t(0)) != n_flips) {
        throw ProtocolError("flip count mismatch in HELLO from " +
                            h->payload.value("role", std::string("?")));
      }
    }
    bob_cheats = hb.payload.value("mode", std::string("honest")) == "cheat";
    WireFrame ack;
    ack.type = FrameType::Hello;
    ack.payload["role"] = "physics";
    ack.payload["scenario"] = hash;
    send_tapped(alice, "p->a", ack);
    send_tapped(bob, "p->b", ack);
  } catch (const ProtocolError& e) {
    abort_both(e.what());
    throw;
  }

  try {
    for (std::uint64_t round = 1; round <= n_flips; ++round) {
      const WireFrame block = recv_tapped(alice, "a->p");
      if (block.type != FrameType::PulseBlock || block.round_id != round) {
        throw ProtocolError("expected PULSE_BLOCK for round " +
                            std::to_string(round));
      }
      const std::vector<StateLabel> labels =
          unpack_labels(block.payload.value("labels", std::string()), k);

      WireFrame det;
      det.type = FrameType::Detection;
      det.round_id = round;
      bool detected = false;
      if (!bob_cheats) {
        const double u_geom = physics_rng.uniform01();
        const double u_mix = physics_rng.uniform01();
        const double u_chan = physics_rng.uniform01();
        const std::uint64_t j = model.first_detection_index(u_geom);
        detected = j != 0;
        det.payload["detected"] = detected;
        if (detected) {
          const Detection d =
              model.click_channel(labels[j - 1], u_mix, u_chan);
          det.payload["j"] = j;
          det.payload["channel"] = d.channel.index();
        }
      } else {
        const CheatPlan plan = sample_cheat_detection(
            stats, k, scenario.state_param_a, labels, physics_rng);
        detected = plan.detected;
        det.payload["detected"] = detected;
        if (detected) {
          det.payload["j"] = plan.j;
          det.payload["c_hat"] = plan.c_hat;
        }
      }
      send_tapped(bob, "p->b", det);
      if (detected) {
        ++summary.n_detection;
      } else {
        ++summary.n_no_detection;
      }

      if (detected) {
        const WireFrame challenge = recv_tapped(bob, "b->p");
        if (challenge.type != FrameType::Challenge ||
            challenge.round_id != round) {
          throw ProtocolError("expected CHALLENGE for round " +
                              std::to_string(round));
        }
        send_tapped(alice, "p->a", challenge);
        const WireFrame reveal = recv_tapped(alice, "a->p");
        if (reveal.type != FrameType::Reveal || reveal.round_id != round) {
          throw ProtocolError("expected REVEAL for round " +
                              std::to_string(round));
        }
        send_tapped(bob, "p->b", reveal);
      }
      const WireFrame verdict = recv_tapped(bob, "b->p");
      if (verdict.type != FrameType::Verdict || verdict.round_id != round) {
        throw ProtocolError("expected VERDICT for round " +
                            std::to_string(round));
      }
      send_tapped(alice, "p->a", verdict);
      ++summary.rounds_served;
    }

    const WireFrame stats_a = recv_tapped(alice, "a->p");
    const WireFrame stats_b = recv_tapped(bob, "b->p");
    if (stats_a.type != FrameType::Stats || stats_b.type != FrameType::Stats) {
      throw ProtocolError("expected STATS from both parties");
    }
    summary.alice_stats = stats_a.payload;
    summary.bob_stats = stats_b.payload;
    WireFrame ack;
    ack.type = FrameType::Stats;
    ack.round_id = n_flips;
    ack.payload["rounds_served"] = summary.rounds_served;
    ack.payload["n_detection"] = summary.n_detection;
    ack.payload["n_no_detection"] = summary.n_no_detection;
    send_tapped(alice, "p->a", ack);
    send_tapped(bob, "p->b", ack);
    summary.clean_finish = true;
  } catch (const PeerDisconnected& e) {
    // Party departed: tear down, keep the partial tallies.
    summary.note = e.what();
    abort_both(e.what());
  } catch (const ProtocolError& e) {
    summary.note = e.what();
    abort_both(e.what());
    throw;
  }
  return summary;
}

PartySummary run_alice(LineStream& physics, const ScenarioConfig& scenario,
                       std::uint64_t n_flips, BitSource bits) {
  scenario.validate();
  const std::uint64_t k = scenario.pulses_per_flip;
  PartySummary summary;
  summary.role = "alice";

  WireFrame hello;
  hello.type = FrameType::Hello;
  hello.payload["role"] = "alice";
  hello.payload["scenario"] = scenario_hash_hex(scenario);
  hello.payload["flips"] = n_flips;
  send_frame(physics, hello);
  const WireFrame ack = recv_frame(physics);
  if (ack.type == FrameType::Abort) {
    throw ProtocolError("physics rejected session: " +
                        ack.payload.value("reason", std::string()));
  }
  if (ack.type != FrameType::Hello) {
    throw ProtocolError("expected HELLO ack from physics");
  }

  std::vector<StateLabel> labels(k);
  for (std::uint64_t round = 1; round <= n_flips; ++round) {
    for (std::uint64_t i = 0; i < k; ++i) {
      labels[i] = draw_state_choice(bits);
    }
    WireFrame block;
    block.type = FrameType::PulseBlock;
    block.round_id = round;
    block.payload["labels"] = pack_labels(labels);
    send_frame(physics, block);

    WireFrame f = recv_frame(physics);
    if (f.type == FrameType::Abort) {
      throw ProtocolError("session aborted: " +
                          f.payload.value("reason", std::string()));
    }
    if (f.type == FrameType::Challenge && f.round_id == round) {
      if (!f.payload.contains("j") || !f.payload["j"].is_number_unsigned()) {
        throw ProtocolError("CHALLENGE missing pulse index");
      }
      const std::uint64_t j = f.payload["j"].get<std::uint64_t>();
      if (j < 1 || j > k) {
        throw ProtocolError("CHALLENGE pulse index " + std::to_string(j) +
                            " outside [1, " + std::to_string(k) + "]");
      }
      payload_bit(f, "b");
      WireFrame reveal;
      reveal.type = FrameType::Reveal;
      reveal.round_id = round;
      reveal.payload["alpha"] = labels[j - 1].alpha;
      reveal.payload["c"] = labels[j - 1].c;
      send_frame(physics, reveal);
      f = expect_frame(physics, FrameType::Verdict, round);
    } else if (!(f.type == FrameType::Verdict && f.round_id == round)) {
      throw ProtocolError("out-of-order frame: expected CHALLENGE or VERDICT, "
                          "got " +
                          std::string(frame_type_name(f.type)) + "/" +
                          std::to_string(f.round_id));
    }
    if (f.payload.value("accept", false)) {
      record_outcome(summary, payload_bit(f, "outcome") ? '1' : '0');
    } else {
      const std::string reason = f.payload.value("reason", std::string());
      if (reason == "no_detection") {
        record_outcome(summary, 'n');
      } else if (reason == "mismatch") {
        record_outcome(summary, 'm');
      } else {
        throw ProtocolError("VERDICT with unknown abort reason '" + reason +
                            "'");
      }
    }
  }

  summary.bits_consumed = bits.bits_consumed();
  finish_summary(summary);
  WireFrame stats;
  stats.type = FrameType::Stats;
  stats.round_id = n_flips;
  stats.payload = party_stats_json(summary);
  send_frame(physics, stats);
  expect_frame(physics, FrameType::Stats, n_flips);
  return summary;
}

PartySummary run_bob(LineStream& physics, const ScenarioConfig& scenario,
                     std::uint64_t n_flips, BitSource bits,
                     const BobOptions& options) {
  scenario.validate();
  const std::uint64_t k = scenario.pulses_per_flip;
  PartySummary summary;
  summary.role = "bob";

  WireFrame hello;
  hello.type = FrameType::Hello;
  hello.payload["role"] = "bob";
  hello.payload["scenario"] = scenario_hash_hex(scenario);
  hello.payload["flips"] = n_flips;
  hello.payload["mode"] = options.cheat ? "cheat" : "honest";
  if (options.cheat) hello.payload["target"] = options.cheat_target;
  send_frame(physics, hello);
  const WireFrame ack = recv_frame(physics);
  if (ack.type == FrameType::Abort) {
    throw ProtocolError("physics rejected session: " +
                        ack.payload.value("reason", std::string()));
  }
  if (ack.type != FrameType::Hello) {
    throw ProtocolError("expected HELLO ack from physics");
  }

  for (std::uint64_t round = 1; round <= n_flips; ++round) {
    const WireFrame det = expect_frame(physics, FrameType::Detection, round);
    const bool detected = det.payload.value("detected", false);
    const int b = options.cheat ? 0 : bits.draw_bit();

    WireFrame verdict;
    verdict.type = FrameType::Verdict;
    verdict.round_id = round;
    if (!detected) {
      verdict.payload["accept"] = false;
      verdict.payload["reason"] = "no_detection";
      send_frame(physics, verdict);
      record_outcome(summary, 'n');
      continue;
    }
    if (!det.payload.contains("j") || !det.payload["j"].is_number_unsigned()) {
      throw ProtocolError("DETECTION missing pulse index");
    }
    const std::uint64_t j = det.payload["j"].get<std::uint64_t>();
    if (j < 1 || j > k) {
      throw ProtocolError("DETECTION pulse index out of range");
    }

    int challenge_b = b;
    StateLabel channel{};
    int c_hat = 0;
    if (options.cheat) {
      c_hat = payload_bit(det, "c_hat");
      challenge_b = c_hat ^ options.cheat_target;
    } else {
      if (!det.payload.contains("channel") ||
          !det.payload["channel"].is_number_integer()) {
        throw ProtocolError("DETECTION missing channel");
      }
      const int idx = det.payload["channel"].get<int>();
      if (idx < 0 || idx > 3) {
        throw ProtocolError("DETECTION channel index out of range");
      }
      channel = StateLabel::from_index(idx);
    }

    WireFrame challenge;
    challenge.type = FrameType::Challenge;
    challenge.round_id = round;
    challenge.payload["j"] = j;
    challenge.payload["b"] = challenge_b;
    send_frame(physics, challenge);

    const WireFrame reveal = expect_frame(physics, FrameType::Reveal, round);
    const int alpha = payload_bit(reveal, "alpha");
    const int c = payload_bit(reveal, "c");

    if (!options.cheat && channel.alpha == alpha && channel.c != c) {
      verdict.payload["accept"] = false;
      verdict.payload["reason"] = "mismatch";
      send_frame(physics, verdict);
      record_outcome(summary, 'm');
      continue;
    }
    const int outcome = c ^ challenge_b;
    verdict.payload["accept"] = true;
    verdict.payload["outcome"] = outcome;
    send_frame(physics, verdict);
    record_outcome(summary, outcome ? '1' : '0');
  }

  summary.bits_consumed = bits.bits_consumed();
  finish_summary(summary);
  WireFrame stats;
  stats.type = FrameType::Stats;
  stats.round_id = n_flips;
  stats.payload = party_stats_json(summary);
  send_frame(physics, stats);
  expect_frame(physics, FrameType::Stats, n_flips);
  return summary;
}

LocalNetResult run_local_session(const ScenarioConfig& scenario,
                                 std::uint64_t n_flips,
                                 const BobOptions& bob_options,
                                 const FrameTap& tap) {
  auto [phys_a, alice_end] = make_pipe();
  auto [phys_b, bob_end] = make_pipe();

  LocalNetResult result;
  std::exception_ptr errors[3];

  std::thread alice_thread([&] {
    try {
      result.alice = run_alice(*alice_end, scenario, n_flips,
                               scenario.rng.alice.open());
      alice_end->close();
    } catch (...) {
      errors[0] = std::current_exception();
      alice_end->close();
    }
  });
  std::thread bob_thread([&] {
    try {
      result.bob = run_bob(*bob_end, scenario, n_flips,
                           scenario.rng.bob.open(), bob_options);
      bob_end->close();
    } catch (...) {
      errors[1] = std::current_exception();
      bob_end->close();
    }
  });
  try {
    result.physics = serve_physics(scenario, n_flips, *phys_a, *phys_b, tap);
  } catch (...) {
    errors[2] = std::current_exception();
  }
  phys_a->close();
  phys_b->close();
  alice_thread.join();
  bob_thread.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace qscf::net
