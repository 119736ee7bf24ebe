#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "qscf/errors.hpp"
#include "qscf/net_harness.hpp"
#include "qscf/run_config.hpp"
#include "qscf/security_analysis.hpp"
#include "stats_helpers.hpp"

using namespace qscf;
using namespace qscf::net;
using doctest::Approx;

namespace {

ScenarioConfig small_scenario(std::uint64_t seed = 1,
                              std::uint64_t k = 500) {
  ScenarioConfig sc;
  sc.source = SourceSpec{SourceKind::Sps, 0.0013, 0.03};
  sc.link = LinkBudget{0.0, 0.5, 0.85, 4e-7, 0.028};
  sc.pulses_per_flip = k;
  sc.state_param_a = 0.9;
  sc.clock_hz = 80e6;
  sc.rng = ScenarioRng::from_master_seed(seed);
  return sc;
}

struct TapLog {
  std::mutex mu;
  std::vector<std::pair<std::string, WireFrame>> frames;

  FrameTap tap() {
    return [this](std::string_view leg, const WireFrame& f) {
      std::lock_guard lock(mu);
      frames.emplace_back(std::string(leg), f);
    };
  }
};

}  // namespace

TEST_CASE("frames survive an encode/decode round trip") {
  WireFrame f;
  f.type = FrameType::Challenge;
  f.round_id = 17;
  f.payload["j"] = 17;
  f.payload["b"] = 1;
  const WireFrame g = decode_frame(encode_frame(f));
  CHECK(g == f);

  WireFrame det;
  det.type = FrameType::Detection;
  det.round_id = 3;
  det.payload["detected"] = true;
  det.payload["j"] = 12;
  det.payload["channel"] = 2;
  CHECK(decode_frame(encode_frame(det)) == det);
}

TEST_CASE("malformed frames are protocol errors") {
  CHECK_THROWS_AS(decode_frame("{\"v\":1,\"type\":\"CHAL"), ProtocolError);
  CHECK_THROWS_AS(decode_frame(""), ProtocolError);
  CHECK_THROWS_AS(decode_frame("[1,2,3]"), ProtocolError);
  CHECK_THROWS_AS(decode_frame("{\"type\":\"HELLO\",\"round\":0}"),
                  ProtocolError);  // missing version
  CHECK_THROWS_AS(decode_frame("{\"v\":2,\"type\":\"HELLO\",\"round\":0}"),
                  ProtocolError);  // wrong version
  CHECK_THROWS_AS(decode_frame("{\"v\":1,\"type\":\"HELLO\"}"),
                  ProtocolError);  // missing round
}

TEST_CASE("unknown frame tags are reported by name") {
  try {
    decode_frame("{\"v\":1,\"type\":\"FLUSH\",\"round\":0}");
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("FLUSH") != std::string::npos);
  }
}

TEST_CASE("label packing round-trips odd block sizes") {
  BitSource bits = BitSource::seeded(5);
  std::vector<StateLabel> labels(37);
  for (auto& l : labels) l = draw_state_choice(bits);
  CHECK(unpack_labels(pack_labels(labels), labels.size()) == labels);
  CHECK_THROWS_AS(unpack_labels("abc", 37), ProtocolError);
  CHECK_THROWS_AS(unpack_labels(std::string(20, 'x'), 80), ProtocolError);
}

TEST_CASE("pipes carry lines and signal end of stream") {
  auto [a, b] = make_pipe();
  a->write_line("hello");
  CHECK(b->read_line() == std::string("hello"));
  a->close();
  CHECK_FALSE(b->read_line().has_value());
}

TEST_CASE("honest networked session: both parties log identical outcomes") {
  const ScenarioConfig sc = small_scenario(11);
  const LocalNetResult r = run_local_session(sc, 300);
  CHECK(r.alice.n_flips == 300);
  CHECK(r.bob.n_flips == 300);
  CHECK(r.alice.outcome_codes == r.bob.outcome_codes);
  CHECK(r.alice.outcome_digest == r.bob.outcome_digest);
  CHECK(r.physics.clean_finish);
  CHECK(r.physics.rounds_served == 300);
  CHECK(r.alice.n_success + r.alice.n_abort_nodetect +
            r.alice.n_abort_mismatch ==
        300);
}

TEST_CASE("networked run is bit-identical to the in-process engine") {
  const ScenarioConfig sc = small_scenario(33, 300);
  const std::uint64_t n = 400;
  const LocalNetResult net = run_local_session(sc, n);
  const SessionResult local = run_session_full(sc, n, 1, false);
  CHECK(net.bob.outcome_codes == local.outcome_codes);
  CHECK(net.bob.outcome_digest == local.stats.outcome_digest);
  CHECK(net.alice.outcome_digest == local.stats.outcome_digest);
  CHECK(net.alice.bits_consumed == local.stats.alice_bits);
  CHECK(net.bob.bits_consumed == local.stats.bob_bits);
}

TEST_CASE("scenario hash mismatch is rejected at HELLO") {
  const ScenarioConfig sc = small_scenario(3);
  ScenarioConfig other = sc;
  other.link.qber = 0.031;  // different physical scenario
  CHECK(scenario_hash_hex(sc) != scenario_hash_hex(other));

  auto [phys_a, alice_end] = make_pipe();
  auto [phys_b, bob_end] = make_pipe();
  std::atomic<bool> alice_failed{false};
  std::atomic<bool> bob_failed{false};
  std::thread alice_thread([&] {
    try {
      run_alice(*alice_end, other, 10, other.rng.alice.open());
    } catch (const ProtocolError&) {
      alice_failed = true;
    }
    alice_end->close();
  });
  std::thread bob_thread([&] {
    try {
      run_bob(*bob_end, sc, 10, sc.rng.bob.open());
    } catch (const ProtocolError&) {
      bob_failed = true;
    }
    bob_end->close();
  });
  CHECK_THROWS_AS(serve_physics(sc, 10, *phys_a, *phys_b), ProtocolError);
  phys_a->close();
  phys_b->close();
  alice_thread.join();
  bob_thread.join();
  CHECK(alice_failed);
  CHECK(bob_failed);
}

TEST_CASE("out-of-order frames tear the session down") {
  const ScenarioConfig sc = small_scenario(4);
  auto [phys_a, alice_end] = make_pipe();
  auto [phys_b, bob_end] = make_pipe();
  std::thread bob_thread([&] {
    try {
      run_bob(*bob_end, sc, 5, sc.rng.bob.open());
    } catch (const ProtocolError&) {
    }
    bob_end->close();
  });
  std::thread fake_alice([&] {
    WireFrame hello;
    hello.type = FrameType::Hello;
    hello.payload["role"] = "alice";
    hello.payload["scenario"] = scenario_hash_hex(sc);
    hello.payload["flips"] = 5;
    alice_end->write_line(encode_frame(hello));
    alice_end->read_line();  // ack
    WireFrame reveal;  // REVEAL before any PULSE_BLOCK: out of order
    reveal.type = FrameType::Reveal;
    reveal.round_id = 1;
    reveal.payload["alpha"] = 0;
    reveal.payload["c"] = 0;
    alice_end->write_line(encode_frame(reveal));
    while (alice_end->read_line()) {
    }
    alice_end->close();
  });
  CHECK_THROWS_AS(serve_physics(sc, 5, *phys_a, *phys_b), ProtocolError);
  phys_a->close();
  phys_b->close();
  fake_alice.join();
  bob_thread.join();
}

TEST_CASE("alice rejects challenges with an out-of-range pulse index") {
  const ScenarioConfig sc = small_scenario(5, 100);
  auto [fake_phys, alice_end] = make_pipe();
  std::thread alice_thread([&] {
    CHECK_THROWS_AS(
        run_alice(*alice_end, sc, 3, sc.rng.alice.open()), ProtocolError);
    alice_end->close();
  });
  // speak just enough of the protocol to deliver the bad challenge
  auto line = fake_phys->read_line();  // HELLO
  REQUIRE(line.has_value());
  WireFrame ack;
  ack.type = FrameType::Hello;
  ack.payload["role"] = "physics";
  fake_phys->write_line(encode_frame(ack));
  line = fake_phys->read_line();  // PULSE_BLOCK round 1
  REQUIRE(line.has_value());
  WireFrame challenge;
  challenge.type = FrameType::Challenge;
  challenge.round_id = 1;
  challenge.payload["j"] = 101;  // K is 100
  challenge.payload["b"] = 0;
  fake_phys->write_line(encode_frame(challenge));
  while (fake_phys->read_line()) {
  }
  fake_phys->close();
  alice_thread.join();
}

TEST_CASE("physics keeps the quantum information confined") {
  const ScenarioConfig sc = small_scenario(12);
  TapLog log;
  const LocalNetResult r = run_local_session(sc, 200, {}, log.tap());
  CHECK(r.physics.clean_finish);

  std::uint64_t expected_detection_round = 1;
  std::uint64_t last_challenge_round = 0;
  for (const auto& [leg, frame] : log.frames) {
    if (leg == "b->p" && frame.type == FrameType::Challenge) {
      last_challenge_round = frame.round_id;
    }
    if (leg == "p->b") {
      // Bob never sees a prepared pulse block; his only per-round inputs
      // before his own challenge are {j, channel}, and the basis/bit of a
      // pulse reach him only inside the reveal he asked for.
      CHECK_FALSE(frame.payload.contains("labels"));
      if (frame.type == FrameType::Detection) {
        CHECK(frame.round_id == expected_detection_round);
        ++expected_detection_round;
        for (auto it = frame.payload.begin(); it != frame.payload.end();
             ++it) {
          CHECK((it.key() == "detected" || it.key() == "j" ||
                 it.key() == "channel"));
        }
      } else if (frame.type == FrameType::Reveal) {
        CHECK(frame.round_id == last_challenge_round);
      } else {
        CHECK_FALSE(frame.payload.contains("alpha"));
        CHECK_FALSE(frame.payload.contains("c"));
      }
    }
    if (leg == "p->a") {
      // Alice never learns which channel fired.
      CHECK_FALSE(frame.payload.contains("channel"));
      CHECK_FALSE(frame.payload.contains("labels"));
      CHECK((frame.type == FrameType::Hello ||
             frame.type == FrameType::Challenge ||
             frame.type == FrameType::Verdict ||
             frame.type == FrameType::Stats || frame.type == FrameType::Abort));
    }
  }
  CHECK(expected_detection_round == 201);  // one detection frame per round
}

TEST_CASE("networked forcing strategy shows the analytic bias") {
  const ScenarioConfig sc = small_scenario(14, 2000);
  BobOptions cheat;
  cheat.cheat = true;
  cheat.cheat_target = 1;
  const std::uint64_t n = 4000;
  const LocalNetResult r = run_local_session(sc, n, cheat);
  CHECK(r.physics.clean_finish);
  const double expected = bob_cheat_prob(
      0.9, photon_statistics(sc.source), sc.pulses_per_flip);
  const double forced = static_cast<double>(r.bob.n_outcome1) /
                        static_cast<double>(r.bob.n_success);
  const double sigma = testutil::binom_sigma(
      expected, static_cast<double>(r.bob.n_success));
  CHECK(testutil::within_sigmas(forced, expected, sigma, 4.0));
  // honest Alice sees the same outcomes she would log herself
  CHECK(r.alice.outcome_codes == r.bob.outcome_codes);
}

TEST_CASE("networked and in-process sessions agree in distribution") {
  const ScenarioConfig net_sc = small_scenario(91, 700);
  const ScenarioConfig local_sc = small_scenario(92, 700);
  const std::uint64_t n = 4000;
  const LocalNetResult net = run_local_session(net_sc, n);
  const SessionResult local = run_session_full(local_sc, n, 1, false);

  auto histogram = [](const std::vector<char>& codes) {
    std::vector<std::uint64_t> h(4, 0);
    for (char c : codes) {
      h[c == '0' ? 0 : c == '1' ? 1 : c == 'm' ? 2 : 3]++;
    }
    return h;
  };
  const double stat = testutil::chi2_homogeneity(
      histogram(net.bob.outcome_codes), histogram(local.outcome_codes));
  CHECK(stat < testutil::chi2_crit_p01(3));
}

TEST_CASE("session runs over real localhost sockets") {
  const ScenarioConfig sc = small_scenario(55, 200);
  const std::uint64_t n = 60;
  Listener alice_listener("127.0.0.1:0");
  Listener bob_listener("127.0.0.1:0");
  const std::string alice_ep = alice_listener.bound_endpoint();
  const std::string bob_ep = bob_listener.bound_endpoint();

  PartySummary alice_summary;
  PartySummary bob_summary;
  std::thread alice_thread([&] {
    auto stream = connect_endpoint(alice_ep);
    alice_summary = run_alice(*stream, sc, n, sc.rng.alice.open());
  });
  std::thread bob_thread([&] {
    auto stream = connect_endpoint(bob_ep);
    bob_summary = run_bob(*stream, sc, n, sc.rng.bob.open());
  });
  auto alice_stream = alice_listener.accept_one();
  auto bob_stream = bob_listener.accept_one();
  const PhysicsSummary phys =
      serve_physics(sc, n, *alice_stream, *bob_stream);
  alice_thread.join();
  bob_thread.join();

  CHECK(phys.clean_finish);
  CHECK(alice_summary.outcome_digest == bob_summary.outcome_digest);
  // and the socket transport changes nothing versus the in-process engine
  const SessionStats local = run_session(sc, n);
  CHECK(alice_summary.outcome_digest == local.outcome_digest);
}

TEST_CASE("party disconnect ends with a partial summary") {
  const ScenarioConfig sc = small_scenario(6);
  auto [phys_a, alice_end] = make_pipe();
  auto [phys_b, bob_end] = make_pipe();
  std::thread bob_thread([&] {
    try {
      run_bob(*bob_end, sc, 50, sc.rng.bob.open());
    } catch (const ProtocolError&) {
    }
    bob_end->close();
  });
  std::thread fake_alice([&] {
    WireFrame hello;
    hello.type = FrameType::Hello;
    hello.payload["role"] = "alice";
    hello.payload["scenario"] = scenario_hash_hex(sc);
    hello.payload["flips"] = 50;
    alice_end->write_line(encode_frame(hello));
    alice_end->read_line();
    alice_end->close();  // walk away mid-session
  });
  const PhysicsSummary summary = serve_physics(sc, 50, *phys_a, *phys_b);
  CHECK_FALSE(summary.clean_finish);
  CHECK_FALSE(summary.note.empty());
  phys_a->close();
  phys_b->close();
  fake_alice.join();
  bob_thread.join();
}
