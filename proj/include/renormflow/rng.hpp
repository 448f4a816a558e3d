#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

namespace renormflow {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The key is
// the 64-bit master seed, the 128-bit counter holds (block counter, stream id).
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

constexpr Block round(const Block& ctr, const Key& key) {
  const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

constexpr Block generate(Block ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    ctr = round(ctr, key);
    if (r < 9) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
  }
  return ctr;
}

}  // namespace philox

// One independent random stream. Output depends only on
// (master_seed, stream_id, counter), so any assignment of streams to worker
// threads reproduces the same numbers.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id,
            std::uint64_t counter = 0)
      : master_seed_(master_seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  // Number of 128-bit blocks consumed so far.
  std::uint64_t counter() const { return counter_; }

  philox::Block next_block() {
    const philox::Block ctr{static_cast<std::uint32_t>(counter_),
                            static_cast<std::uint32_t>(counter_ >> 32),
                            static_cast<std::uint32_t>(stream_id_),
                            static_cast<std::uint32_t>(stream_id_ >> 32)};
    const philox::Key key{static_cast<std::uint32_t>(master_seed_),
                          static_cast<std::uint32_t>(master_seed_ >> 32)};
    ++counter_;
    buffered_ = 0;
    return philox::generate(ctr, key);
  }

  // UniformRandomBitGenerator interface; two 64-bit words per block.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() {
    if (buffered_ == 0) {
      const auto b = next_block();
      spare_ = join(b[2], b[3]);
      buffered_ = 1;
      return join(b[0], b[1]);
    }
    buffered_ = 0;
    return spare_;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return to_unit((*this)()); }

  // Standard normal by the 128-layer ziggurat; usually one 64-bit word.
  double normal();

  std::pair<double, double> normal_pair() {
    const double a = normal();
    return {a, normal()};
  }

 private:
  static constexpr std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
    return std::uint64_t{lo} | (std::uint64_t{hi} << 32);
  }
  static constexpr double to_unit(std::uint64_t w) {
    return static_cast<double>(w >> 11) * 0x1.0p-53;
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
  std::uint64_t spare_ = 0;
  int buffered_ = 0;
};

namespace detail {

// Layer table of the 128-block ziggurat for the standard normal
// (Marsaglia and Tsang; layout as in Doornik's ZIGNOR).
struct ZigguratTable {
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;
  std::array<double, 129> x{};
  std::array<double, 128> ratio{};

  ZigguratTable() {
    double f = std::exp(-0.5 * kR * kR);
    x[0] = kV / f;
    x[1] = kR;
    x[128] = 0.0;
    for (int i = 2; i < 128; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < 128; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

inline const ZigguratTable& ziggurat() {
  static const ZigguratTable table;
  return table;
}

}  // namespace detail

inline double RngStream::normal() {
  const auto& t = detail::ziggurat();
  for (;;) {
    const std::uint64_t w = (*this)();
    const double u = 2.0 * to_unit(w) - 1.0;  // uses bits 11..63
    const auto i = static_cast<int>(w & 127u);
    if (std::abs(u) < t.ratio[i]) return u * t.x[i];
    if (i == 0) {
      // Tail beyond R.
      double tx;
      double ty;
      do {
        tx = std::log(1.0 - uniform()) / detail::ZigguratTable::kR;
        ty = std::log(1.0 - uniform());
      } while (-2.0 * ty < tx * tx);
      return u < 0.0 ? tx - detail::ZigguratTable::kR : detail::ZigguratTable::kR - tx;
    }
    const double xu = u * t.x[i];
    const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - xu * xu));
    const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - xu * xu));
    if (f1 + uniform() * (f0 - f1) < 1.0) return xu;
  }
}

// SplitMix64 finalizer; derives decorrelated seeds from (seed, salt).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace renormflow
