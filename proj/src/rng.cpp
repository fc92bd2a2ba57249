#include "umlab/rng.hpp"

#include <cmath>

namespace umlab {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b,
                             std::uint64_t& hi) {
  const unsigned __int128 p =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  hi = static_cast<std::uint64_t>(p >> 64);
  return static_cast<std::uint64_t>(p);
}

}  // namespace

Philox4x64::Counter Philox4x64::block(Counter x, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0 = 0;
    std::uint64_t hi1 = 0;
    const std::uint64_t lo0 = mulhilo(kMul0, x[0], hi0);
    const std::uint64_t lo1 = mulhilo(kMul1, x[2], hi1);
    x = {hi1 ^ x[1] ^ key[0], lo1, hi0 ^ x[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return x;
}

RngStream::RngStream(std::uint64_t master_seed, StreamKind kind,
                     std::uint64_t trial, std::uint64_t level,
                     std::uint64_t block)
    : key_{master_seed, static_cast<std::uint64_t>(kind)},
      base_{0, trial, level, block} {}

void RngStream::refill() {
  Philox4x64::Counter ctr = base_;
  ctr[0] = block_index_++;
  buffer_ = Philox4x64::block(ctr, key_);
  buffer_pos_ = 0;
}

std::uint64_t RngStream::next_u64() {
  if (buffer_pos_ == 4) refill();
  return buffer_[buffer_pos_++];
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * next_uniform() - 1.0;
    v = 2.0 * next_uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  // rejection on the top of the range keeps the draw exactly uniform
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t x = 0;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

}  // namespace umlab
