#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "qscf/errors.hpp"
#include "qscf/randomness.hpp"
#include "stats_helpers.hpp"

using namespace qscf;

TEST_CASE("seeded source is reproducible and stream-separated") {
  BitSource a = BitSource::seeded(42, 1);
  BitSource b = BitSource::seeded(42, 1);
  BitSource c = BitSource::seeded(42, 2);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const int bit_a = a.draw_bit();
    CHECK(bit_a == b.draw_bit());
    any_diff |= bit_a != c.draw_bit();
  }
  CHECK(any_diff);

  BitSource d = BitSource::seeded(42, 1);
  CHECK(d.substream(2).draw_word(64) == BitSource::seeded(42, 2).draw_word(64));
}

TEST_CASE("file bits come out MSB-first within each byte") {
  BitSource s = BitSource::from_bytes({0xA5});
  const std::vector<std::uint8_t> expected{1, 0, 1, 0, 0, 1, 0, 1};
  CHECK(s.draw_bits(8) == expected);

  BitSource w = BitSource::from_bytes({0xA5, 0x3C});
  CHECK(w.draw_word(16) == 0xA53C);
}

TEST_CASE("one byte yields exactly eight bits, the ninth errors") {
  BitSource s = BitSource::from_bytes({0xFF});
  for (int i = 0; i < 8; ++i) s.draw_bit();
  CHECK(s.bits_consumed() == 8);
  CHECK(s.bits_remaining() == 0);
  CHECK_THROWS_AS(s.draw_bit(), EntropyExhausted);
  CHECK_THROWS_AS(s.skip(1), EntropyExhausted);
  // Never a silent wrap: the failed draws must not have advanced anything.
  CHECK(s.bits_consumed() == 8);
}

TEST_CASE("draw size must be positive") {
  BitSource s = BitSource::seeded(1);
  CHECK_THROWS_AS(s.draw_bits(0), std::domain_error);
  CHECK_THROWS_AS(s.draw_word(0), std::domain_error);
  CHECK_THROWS_AS(s.draw_word(65), std::domain_error);
}

TEST_CASE("all-zero file maps to the (0,0) state choice") {
  BitSource s = BitSource::from_bytes(std::vector<std::uint8_t>(8, 0));
  for (int i = 0; i < 32; ++i) {
    const StateLabel l = draw_state_choice(s);
    CHECK(l.alpha == 0);
    CHECK(l.c == 0);
  }
}

TEST_CASE("state choice maps first bit to alpha, second to c") {
  // bits 1,0 -> alpha=1, c=0
  BitSource s = BitSource::from_bytes({0b10011100});
  StateLabel l = draw_state_choice(s);
  CHECK(l.alpha == 1);
  CHECK(l.c == 0);
  l = draw_state_choice(s);
  CHECK(l.alpha == 0);
  CHECK(l.c == 1);
  l = draw_state_choice(s);
  CHECK(l.alpha == 1);
  CHECK(l.c == 1);
}

TEST_CASE("seeded bit stream is unbiased") {
  BitSource s = BitSource::seeded(2024, 5);
  const std::size_t n = 1'000'000;
  std::uint64_t ones = 0;
  for (std::size_t i = 0; i < n; ++i) ones += s.draw_bit();
  const double mean = static_cast<double>(ones) / n;
  const double sigma = testutil::binom_sigma(0.5, n);
  CHECK(testutil::within_sigmas(mean, 0.5, sigma, 4.0));
}

TEST_CASE("state choices are uniform over the four labels") {
  BitSource s = BitSource::seeded(7, 1);
  const std::size_t n = 4'000'000;
  std::vector<std::uint64_t> counts(4, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[draw_state_choice(s).index()];
  }
  const double sigma = testutil::binom_sigma(0.25, n);
  for (int i = 0; i < 4; ++i) {
    const double freq = static_cast<double>(counts[i]) / n;
    CHECK(testutil::within_sigmas(freq, 0.25, sigma, 4.0));
  }
}

TEST_CASE("uniform01 stays in [0,1) with the right mean") {
  BitSource s = BitSource::seeded(99);
  const std::size_t n = 100'000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  const double sigma = 1.0 / std::sqrt(12.0 * n);
  CHECK(testutil::within_sigmas(sum / n, 0.5, sigma, 4.0));
}

TEST_CASE("bit accounting equals the sum of all requests") {
  BitSource s = BitSource::seeded(5);
  s.draw_bit();
  s.draw_word(17);
  s.draw_bits(12);
  s.skip(1000);
  s.uniform01();
  CHECK(s.bits_consumed() == 1 + 17 + 12 + 1000 + 64);
}

TEST_CASE("skip is consumption: skipped file bits are never re-readable") {
  BitSource s = BitSource::from_bytes({0xA5, 0xFF});
  s.skip(8);
  CHECK(s.draw_bit() == 1);
  CHECK(s.bits_consumed() == 9);
}

TEST_CASE("substream of a file source is rejected") {
  BitSource s = BitSource::from_bytes({1, 2, 3});
  CHECK_THROWS_AS(s.substream(1), std::logic_error);
}

TEST_CASE("empty or missing files are load errors") {
  CHECK_THROWS_AS(BitSource::from_bytes({}), ConfigError);
  CHECK_THROWS_AS(BitSource::from_file("/nonexistent/qscf-bits.bin"),
                  ConfigError);
}

TEST_CASE("seeded draws match the documented block construction") {
  // block(i) = mix64(key + (i+1)*GOLDEN), key = mix64(seed ^ mix64(id+GOLDEN))
  const std::uint64_t seed = 1234, id = 9;
  const std::uint64_t key = mix64(seed ^ mix64(id + 0x9E3779B97F4A7C15ull));
  const std::uint64_t block0 = mix64(key + 0x9E3779B97F4A7C15ull);
  BitSource s = BitSource::seeded(seed, id);
  CHECK(s.draw_word(64) == block0);
}
