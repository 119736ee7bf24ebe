#include "qscf/protocol_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "qscf/errors.hpp"

namespace qscf {

RngSpec RngSpec::seeded(std::uint64_t seed, std::uint64_t stream_id) {
  RngSpec s;
  s.mode = Mode::Seeded;
  s.seed = seed;
  s.stream_id = stream_id;
  return s;
}

RngSpec RngSpec::file(std::string path, std::size_t byte_begin,
                      std::size_t byte_end) {
  RngSpec s;
  s.mode = Mode::File;
  s.path = std::move(path);
  s.file_byte_begin = byte_begin;
  s.file_byte_end = byte_end;
  return s;
}

BitSource RngSpec::open() const {
  if (mode == Mode::Seeded) {
    return BitSource::seeded(seed, stream_id);
  }
  return BitSource::from_file(path, file_byte_begin, file_byte_end);
}

ScenarioRng ScenarioRng::from_master_seed(std::uint64_t seed) {
  ScenarioRng r;
  r.alice = RngSpec::seeded(seed, 1);
  r.bob = RngSpec::seeded(seed, 2);
  r.physics = RngSpec::seeded(seed, 3);
  return r;
}

void ScenarioConfig::validate() const {
  source.validate();
  link.validate();
  if (pulses_per_flip < 1) {
    throw std::domain_error("pulses_per_flip must be at least 1");
  }
  StateParameter check(state_param_a);
  (void)check;
  if (!std::isfinite(clock_hz) || clock_hz <= 0.0) {
    throw std::domain_error("clock_hz must be finite and positive");
  }
}

RngBundle RngBundle::open(const ScenarioRng& spec) {
  return RngBundle{spec.alice.open(), spec.bob.open(), spec.physics.open()};
}

char FlipOutcome::code() const {
  switch (kind) {
    case FlipKind::Coin:
      return coin == 0 ? '0' : '1';
    case FlipKind::AbortNoDetection:
      return 'n';
    case FlipKind::AbortMismatch:
      return 'm';
  }
  return '?';
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void SessionStats::add(const FlipOutcome& flip) {
  ++n_flips;
  switch (flip.kind) {
    case FlipKind::Coin:
      ++n_success;
      if (flip.coin == 0) {
        ++n_outcome0;
      } else {
        ++n_outcome1;
      }
      break;
    case FlipKind::AbortNoDetection:
      ++n_abort_nodetect;
      break;
    case FlipKind::AbortMismatch:
      ++n_abort_mismatch;
      break;
  }
}

void SessionStats::finalize(const ScenarioConfig& scenario) {
  p0_hat = n_success ? static_cast<double>(n_outcome0) / n_success : 0.0;
  p1_hat = n_success ? static_cast<double>(n_outcome1) / n_success : 0.0;
  duration_model_s = static_cast<double>(n_flips) *
                     static_cast<double>(scenario.pulses_per_flip) /
                     scenario.clock_hz;
  rate_hz = duration_model_s > 0.0 ? n_success / duration_model_s : 0.0;
}

FlipModel FlipModel::build(const ScenarioConfig& scenario) {
  scenario.validate();
  FlipModel m;
  m.pulses_per_flip = scenario.pulses_per_flip;
  m.state_param_a = scenario.state_param_a;
  const PhotonStatistics stats = photon_statistics(scenario.source);
  m.p_click = per_pulse_click_prob(stats, scenario.link);
  m.log1m_p_click = m.p_click < 1.0 ? std::log1p(-m.p_click) : 0.0;
  m.w_dark = m.p_click > 0.0 ? scenario.link.p_dark / m.p_click : 0.0;
  m.table = expected_io_table(scenario.state_param_a, scenario.link.qber);
  for (int row = 0; row < 4; ++row) {
    double cdf = 0.0;
    for (int col = 0; col < 4; ++col) {
      cdf += m.table.p[row][col];
      m.row_cdf[row][col] = cdf;
    }
    m.row_cdf[row][3] = 1.0;
  }
  return m;
}

std::uint64_t FlipModel::first_detection_index(double u) const {
  if (p_click <= 0.0) return 0;
  if (p_click >= 1.0) return 1;
  const double g = std::floor(std::log1p(-u) / log1m_p_click);
  if (!(g < static_cast<double>(pulses_per_flip))) return 0;
  return static_cast<std::uint64_t>(g) + 1;
}

Detection FlipModel::click_channel(StateLabel sent, double u_mix,
                                   double u_chan) const {
  if (u_mix < w_dark) {
    const int idx = std::min(3, static_cast<int>(u_chan * 4.0));
    return Detection{StateLabel::from_index(idx), true};
  }
  const auto& cdf = row_cdf[sent.index()];
  for (int idx = 0; idx < 3; ++idx) {
    if (u_chan < cdf[idx]) return Detection{StateLabel::from_index(idx), false};
  }
  return Detection{StateLabel::from_index(3), false};
}

namespace {

FlipOutcome judge(StateLabel sent, const Detection& det, std::uint64_t j,
                  int b) {
  FlipOutcome out;
  out.j = j;
  out.sent = sent;
  out.channel = det.channel;
  out.dark = det.dark;
  out.b = b;
  if (det.channel.alpha == sent.alpha && det.channel.c != sent.c) {
    out.kind = FlipKind::AbortMismatch;
  } else {
    out.kind = FlipKind::Coin;
    out.coin = sent.c ^ b;
  }
  return out;
}

}  // namespace

FlipOutcome run_honest_flip(const FlipModel& model, RngBundle& rng) {
  const std::uint64_t k = model.pulses_per_flip;
  const double u_geom = rng.physics.uniform01();
  const double u_mix = rng.physics.uniform01();
  const double u_chan = rng.physics.uniform01();
  const std::uint64_t j = model.first_detection_index(u_geom);
  if (j == 0) {
    rng.alice.skip(2 * k);
    FlipOutcome out;
    out.kind = FlipKind::AbortNoDetection;
    out.b = rng.bob.draw_bit();
    return out;
  }
  rng.alice.skip(2 * (j - 1));
  const StateLabel sent = draw_state_choice(rng.alice);
  rng.alice.skip(2 * (k - j));
  const int b = rng.bob.draw_bit();
  const Detection det = model.click_channel(sent, u_mix, u_chan);
  return judge(sent, det, j, b);
}

FlipOutcome run_honest_flip(const ScenarioConfig& scenario, RngBundle& rng) {
  return run_honest_flip(FlipModel::build(scenario), rng);
}

FlipOutcome run_honest_flip_naive(const ScenarioConfig& scenario,
                                  RngBundle& rng) {
  scenario.validate();
  const PhotonStatistics stats = photon_statistics(scenario.source);
  const std::uint64_t k = scenario.pulses_per_flip;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const StateLabel sent = draw_state_choice(rng.alice);
    const DetectionEvent ev = sample_detection(
        sent, scenario.state_param_a, stats, scenario.link, rng.physics);
    if (ev) {
      rng.alice.skip(2 * (k - i));
      const int b = rng.bob.draw_bit();
      return judge(sent, *ev, i, b);
    }
  }
  FlipOutcome out;
  out.kind = FlipKind::AbortNoDetection;
  out.b = rng.bob.draw_bit();
  return out;
}

bool SimulatedIoTable::all_rows_ok() const {
  for (int row = 0; row < 4; ++row) {
    if (!row_ok(row)) return false;
  }
  return true;
}

namespace {

struct IoCounts {
  std::array<std::array<std::uint64_t, 4>, 4> counts{};

  void add(StateLabel sent, StateLabel detected) {
    ++counts[sent.index()][detected.index()];
  }
  void merge(const IoCounts& other) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) counts[r][c] += other.counts[r][c];
    }
  }
};

SimulatedIoTable normalize(const IoCounts& counts) {
  SimulatedIoTable io;
  for (int r = 0; r < 4; ++r) {
    std::uint64_t total = 0;
    for (int c = 0; c < 4; ++c) total += counts.counts[r][c];
    io.detections_per_row[r] = total;
    for (int c = 0; c < 4; ++c) {
      io.table.p[r][c] =
          total ? static_cast<double>(counts.counts[r][c]) / total : 0.0;
    }
  }
  return io;
}

struct ChunkResult {
  SessionStats stats;
  IoCounts io;
  std::vector<char> codes;
};

ChunkResult run_chunk(const ScenarioConfig& scenario, const FlipModel& model,
                      std::uint64_t first, std::uint64_t count,
                      bool collect_io) {
  RngBundle rng = RngBundle::open(scenario.rng);
  if (first > 0) {
    rng.alice.skip(first * model.alice_bits_per_flip());
    rng.bob.skip(first * FlipModel::kBobBitsPerFlip);
    rng.physics.skip(first * FlipModel::kPhysicsBitsPerFlip);
  }
  const std::uint64_t base_alice = rng.alice.bits_consumed();
  const std::uint64_t base_bob = rng.bob.bits_consumed();
  const std::uint64_t base_physics = rng.physics.bits_consumed();
  ChunkResult result;
  result.codes.reserve(count);
  for (std::uint64_t f = 0; f < count; ++f) {
    const FlipOutcome flip = run_honest_flip(model, rng);
    result.stats.add(flip);
    result.codes.push_back(flip.code());
    if (collect_io && flip.j != 0) {
      result.io.add(flip.sent, flip.channel);
    }
  }
  result.stats.alice_bits = rng.alice.bits_consumed() - base_alice;
  result.stats.bob_bits = rng.bob.bits_consumed() - base_bob;
  result.stats.physics_bits = rng.physics.bits_consumed() - base_physics;
  return result;
}

}  // namespace

SessionResult run_session_full(const ScenarioConfig& scenario,
                               std::uint64_t n_flips, unsigned jobs,
                               bool collect_io) {
  scenario.validate();
  if (n_flips < 1) {
    throw std::domain_error("a session needs at least one flip");
  }
  const FlipModel model = FlipModel::build(scenario);
  if (jobs < 1) jobs = 1;
  jobs = static_cast<unsigned>(
      std::min<std::uint64_t>(jobs, std::max<std::uint64_t>(1, n_flips)));
  if (jobs > 1 && scenario.rng.alice.mode == RngSpec::Mode::File) {
    // File cursors can be fast-forwarded too, but keep the exhaustion
    // diagnostics simple: parallel sessions are seeded-only.
    jobs = 1;
  }

  std::vector<ChunkResult> chunks(jobs);
  if (jobs == 1) {
    chunks[0] = run_chunk(scenario, model, 0, n_flips, collect_io);
  } else {
    std::vector<std::thread> workers;
    const std::uint64_t per = n_flips / jobs;
    const std::uint64_t extra = n_flips % jobs;
    std::uint64_t first = 0;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
      const std::uint64_t count = per + (w < extra ? 1 : 0);
      workers.emplace_back([&, w, first, count] {
        try {
          chunks[w] = run_chunk(scenario, model, first, count, collect_io);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
      first += count;
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SessionResult result;
  IoCounts io_counts;
  for (auto& chunk : chunks) {
    result.stats.n_flips += chunk.stats.n_flips;
    result.stats.n_success += chunk.stats.n_success;
    result.stats.n_abort_nodetect += chunk.stats.n_abort_nodetect;
    result.stats.n_abort_mismatch += chunk.stats.n_abort_mismatch;
    result.stats.n_outcome0 += chunk.stats.n_outcome0;
    result.stats.n_outcome1 += chunk.stats.n_outcome1;
    result.stats.alice_bits += chunk.stats.alice_bits;
    result.stats.bob_bits += chunk.stats.bob_bits;
    result.stats.physics_bits += chunk.stats.physics_bits;
    io_counts.merge(chunk.io);
    result.outcome_codes.insert(result.outcome_codes.end(),
                                chunk.codes.begin(), chunk.codes.end());
  }
  result.stats.outcome_digest =
      fnv1a64(result.outcome_codes.data(), result.outcome_codes.size());
  result.stats.finalize(scenario);
  result.io = normalize(io_counts);
  return result;
}

SessionStats run_session(const ScenarioConfig& scenario, std::uint64_t n_flips,
                         unsigned jobs) {
  return run_session_full(scenario, n_flips, jobs, false).stats;
}

SessionStats run_session(const ScenarioConfig& scenario, std::uint64_t n_flips,
                         RngBundle& rng) {
  scenario.validate();
  if (n_flips < 1) {
    throw std::domain_error("a session needs at least one flip");
  }
  const FlipModel model = FlipModel::build(scenario);
  const std::uint64_t base_alice = rng.alice.bits_consumed();
  const std::uint64_t base_bob = rng.bob.bits_consumed();
  const std::uint64_t base_physics = rng.physics.bits_consumed();
  SessionStats stats;
  std::vector<char> codes;
  codes.reserve(n_flips);
  for (std::uint64_t f = 0; f < n_flips; ++f) {
    const FlipOutcome flip = run_honest_flip(model, rng);
    stats.add(flip);
    codes.push_back(flip.code());
  }
  stats.alice_bits = rng.alice.bits_consumed() - base_alice;
  stats.bob_bits = rng.bob.bits_consumed() - base_bob;
  stats.physics_bits = rng.physics.bits_consumed() - base_physics;
  stats.outcome_digest = fnv1a64(codes.data(), codes.size());
  stats.finalize(scenario);
  return stats;
}

SimulatedIoTable simulated_io_table(const ScenarioConfig& scenario,
                                    std::uint64_t n_flips, unsigned jobs) {
  return run_session_full(scenario, n_flips, jobs, true).io;
}

void CheatStats::finalize() {
  forced_prob =
      n_detected ? static_cast<double>(n_forced) / n_detected : 0.0;
}

CheatStats run_bob_cheat_session(const PhotonStatistics& stats,
                                 std::uint64_t pulses_per_flip, double a,
                                 int desired_bit, std::uint64_t n_flips,
                                 RngBundle& rng) {
  stats.validate();
  if (!(a >= 0.5 && a <= 1.0)) {
    throw std::domain_error("cheat session: a must lie in [0.5, 1]");
  }
  if (pulses_per_flip < 1) {
    throw std::domain_error("pulses_per_flip must be at least 1");
  }
  if (desired_bit != 0 && desired_bit != 1) {
    throw std::domain_error("desired_bit must be 0 or 1");
  }
  const std::uint64_t k = pulses_per_flip;
  const double pm_slot = prob_multiphoton(stats);
  const double p_multi_seq =
      1.0 - std::exp(static_cast<double>(k) * std::log1p(-pm_slot));
  const double p01 = stats.p0 + stats.p1;
  // P(no photon at all | no multi-photon slot)
  const double p_none_given_single =
      p01 > 0.0 ? std::exp(static_cast<double>(k) *
                           (std::log(stats.p0) - std::log(p01)))
                : 0.0;

  CheatStats out;
  out.n_flips = n_flips;
  for (std::uint64_t f = 0; f < n_flips; ++f) {
    const bool multi = rng.physics.uniform01() < p_multi_seq;
    bool detected = true;
    double p_correct = 1.0;
    if (!multi) {
      detected = stats.p0 < 1.0 &&
                 rng.physics.uniform01() < 1.0 - p_none_given_single;
      p_correct = a;
    }
    if (!detected) {
      rng.alice.skip(2 * k);
      continue;
    }
    const double u_j = rng.physics.uniform01();
    const std::uint64_t j =
        1 + std::min<std::uint64_t>(k - 1, static_cast<std::uint64_t>(
                                               u_j * static_cast<double>(k)));
    rng.alice.skip(2 * (j - 1) + 1);
    const int c = rng.alice.draw_bit();
    rng.alice.skip(2 * (k - j));
    int c_hat = c;
    if (p_correct < 1.0 && !(rng.physics.uniform01() < p_correct)) {
      c_hat = 1 - c;
    }
    const int b = c_hat ^ desired_bit;
    const int outcome = c ^ b;
    ++out.n_detected;
    if (outcome == desired_bit) ++out.n_forced;
  }
  out.finalize();
  return out;
}

CheatStats run_bob_cheat_session(const ScenarioConfig& scenario,
                                 int desired_bit, std::uint64_t n_flips) {
  scenario.validate();
  RngBundle rng = RngBundle::open(scenario.rng);
  return run_bob_cheat_session(photon_statistics(scenario.source),
                               scenario.pulses_per_flip,
                               scenario.state_param_a, desired_bit, n_flips,
                               rng);
}

}  // namespace qscf
