#include "qscf/randomness.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "qscf/errors.hpp"

namespace qscf {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

BitSource BitSource::seeded(std::uint64_t seed, std::uint64_t stream_id) {
  BitSource s;
  s.mode_ = Mode::Seeded;
  s.seed_ = seed;
  s.stream_id_ = stream_id;
  s.key_ = mix64(seed ^ mix64(stream_id + kGolden));
  return s;
}

BitSource BitSource::from_bytes(std::vector<std::uint8_t> bytes) {
  if (bytes.empty()) {
    throw ConfigError("random bit file is empty");
  }
  BitSource s;
  s.mode_ = Mode::File;
  s.bytes_ = std::move(bytes);
  return s;
}

BitSource BitSource::from_file(const std::string& path) {
  return from_file(path, 0, 0);
}

BitSource BitSource::from_file(const std::string& path,
                               std::size_t byte_begin, std::size_t byte_end) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open random bit file: " + path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw ConfigError("error reading random bit file: " + path);
  }
  if (byte_end == 0) byte_end = bytes.size();
  if (byte_begin >= byte_end || byte_end > bytes.size()) {
    throw ConfigError("random bit file range invalid for " + path);
  }
  return from_bytes(std::vector<std::uint8_t>(bytes.begin() + byte_begin,
                                              bytes.begin() + byte_end));
}

BitSource BitSource::substream(std::uint64_t stream_id) const {
  if (mode_ != Mode::Seeded) {
    throw std::logic_error("substream() requires a seeded bit source");
  }
  return seeded(seed_, stream_id);
}

std::uint64_t BitSource::bits_remaining() const {
  if (mode_ == Mode::File) {
    return 8 * bytes_.size() - cursor_;
  }
  return std::numeric_limits<std::uint64_t>::max() - cursor_;
}

void BitSource::require(std::uint64_t nbits) const {
  if (nbits > bits_remaining()) {
    throw EntropyExhausted("entropy exhausted: requested " +
                               std::to_string(nbits) + " bits, " +
                               std::to_string(bits_remaining()) + " remaining",
                           cursor_);
  }
}

std::uint64_t BitSource::block_at(std::uint64_t index) const {
  return mix64(key_ + (index + 1) * kGolden);
}

std::uint64_t BitSource::draw_word(int nbits) {
  if (nbits < 1 || nbits > 64) {
    throw std::domain_error("draw_word: nbits must lie in [1, 64]");
  }
  require(static_cast<std::uint64_t>(nbits));
  std::uint64_t out = 0;
  int need = nbits;
  if (mode_ == Mode::Seeded) {
    while (need > 0) {
      const std::uint64_t blk = block_at(cursor_ >> 6);
      const int off = static_cast<int>(cursor_ & 63u);
      const int take = std::min(64 - off, need);
      const std::uint64_t chunk =
          take == 64 ? blk : ((blk << off) >> (64 - take));
      out = take == 64 ? chunk : ((out << take) | chunk);
      cursor_ += static_cast<std::uint64_t>(take);
      need -= take;
    }
  } else {
    while (need > 0) {
      const std::uint8_t byte = bytes_[cursor_ >> 3];
      const int off = static_cast<int>(cursor_ & 7u);
      const int take = std::min(8 - off, need);
      const std::uint8_t shifted = static_cast<std::uint8_t>(byte << off);
      const std::uint64_t chunk = static_cast<std::uint64_t>(
          take == 8 ? shifted : static_cast<std::uint8_t>(shifted >> (8 - take)));
      out = (out << take) | chunk;
      cursor_ += static_cast<std::uint64_t>(take);
      need -= take;
    }
  }
  return out;
}

int BitSource::draw_bit() { return static_cast<int>(draw_word(1)); }

std::vector<std::uint8_t> BitSource::draw_bits(std::size_t n) {
  if (n < 1) {
    throw std::domain_error("draw_bits: n must be at least 1");
  }
  require(n);
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = static_cast<std::uint8_t>(draw_word(1));
  }
  return bits;
}

double BitSource::uniform01() {
  const std::uint64_t w = draw_word(64);
  return static_cast<double>(w >> 11) * 0x1.0p-53;
}

void BitSource::skip(std::uint64_t nbits) {
  require(nbits);
  cursor_ += nbits;
}

StateLabel draw_state_choice(BitSource& source) {
  const int alpha = source.draw_bit();
  const int c = source.draw_bit();
  return StateLabel{alpha, c};
}

}  // namespace qscf
