#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qscf/qubit_states.hpp"

namespace qscf {

// Supply of random bits for protocol choices and channel simulation.
//
// Two backings:
//  * File  — raw bytes loaded from disk, consumed MSB-first within each
//            byte, never re-read; drawing past the end raises
//            EntropyExhausted.
//  * Seeded — a counter-based generator, reproducible from (seed, stream_id):
//
//        key      = mix64(seed ^ mix64(stream_id + GOLDEN))
//        block(i) = mix64(key + (i + 1) * GOLDEN)       // i-th 64-bit block
//
//    with GOLDEN = 0x9E3779B97F4A7C15 and mix64 the splitmix64 finalizer.
//    Bits are consumed MSB-first within each block. Independent streams for
//    parallel work come from distinct stream_ids of the same seed.
//
// A BitSource is owned by exactly one consumer; it is movable, not copyable.
class BitSource {
 public:
  static BitSource seeded(std::uint64_t seed, std::uint64_t stream_id = 0);
  static BitSource from_file(const std::string& path);
  // Byte range [byte_begin, byte_end) of a file; byte_end = 0 means EOF.
  static BitSource from_file(const std::string& path, std::size_t byte_begin,
                             std::size_t byte_end);
  static BitSource from_bytes(std::vector<std::uint8_t> bytes);

  BitSource(BitSource&&) = default;
  BitSource& operator=(BitSource&&) = default;
  BitSource(const BitSource&) = delete;
  BitSource& operator=(const BitSource&) = delete;

  // Derived independent stream with the same seed. Seeded sources only.
  BitSource substream(std::uint64_t stream_id) const;

  int draw_bit();
  // Next n bits (1..64) as the low bits of the result, first-drawn highest.
  std::uint64_t draw_word(int nbits);
  std::vector<std::uint8_t> draw_bits(std::size_t n);
  // Uniform double in [0, 1) from the next 64 bits (53-bit resolution).
  double uniform01();

  // Advance without materializing values; counts as consumption.
  void skip(std::uint64_t nbits);

  std::uint64_t bits_consumed() const { return cursor_; }
  // Remaining capacity in bits; seeded sources are practically unbounded.
  std::uint64_t bits_remaining() const;
  bool is_seeded() const { return mode_ == Mode::Seeded; }

 private:
  enum class Mode { Seeded, File };

  BitSource() = default;
  std::uint64_t block_at(std::uint64_t index) const;
  void require(std::uint64_t nbits) const;

  Mode mode_ = Mode::Seeded;
  std::uint64_t cursor_ = 0;  // consumed bits, monotone
  // seeded backing
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t key_ = 0;
  // file backing
  std::vector<std::uint8_t> bytes_;
};

// splitmix64 finalizer; the mixing stage of the seeded backing above.
std::uint64_t mix64(std::uint64_t z);

// alpha from the first bit, c from the second.
StateLabel draw_state_choice(BitSource& source);

}  // namespace qscf
