#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace umlab {

// Hard cap on the tree depth: 2^n sites must stay comfortably inside 64-bit
// index arithmetic, and dense matrices above this are out of reach anyway.
inline constexpr int kMaxLevel = 30;

// A site of the configuration space at depth n, i.e. an element of
// {1, ..., 2^n}. Sites are 1-based; the level travels with the value so that
// mixed-level arithmetic is caught instead of silently producing garbage.
struct SiteIndex {
  std::int64_t value = 1;
  int level = 0;
};

inline std::int64_t sites_at_level(int n) {
  if (n < 0 || n > kMaxLevel)
    throw std::invalid_argument("level out of range: " + std::to_string(n));
  return std::int64_t{1} << n;
}

inline void check_site(SiteIndex x) {
  const std::int64_t size = sites_at_level(x.level);
  if (x.value < 1 || x.value > size)
    throw std::invalid_argument("site " + std::to_string(x.value) +
                                " outside {1..2^" + std::to_string(x.level) +
                                "}");
}

// Contiguous member of the depth-r partition: sites [start, end], all sharing
// the same ancestor at height r. Width is always 2^r.
struct BlockRange {
  std::int64_t start = 1;
  std::int64_t end = 1;
  int level = 0;  // r

  std::int64_t size() const { return end - start + 1; }
  bool contains(std::int64_t v) const { return start <= v && v <= end; }
};

// Height of the lowest common ancestor of x and y in the binary hierarchy:
// the smallest r with ceil(x/2^r) == ceil(y/2^r). In 0-based coordinates the
// blocks of the depth-r partition are exactly the sets agreeing on all bits
// above the low r, so the height is the bit length of the XOR.
inline int distance(SiteIndex x, SiteIndex y) {
  if (x.level != y.level)
    throw std::invalid_argument("distance needs sites from the same level");
  check_site(x);
  check_site(y);
  const std::uint64_t diff =
      static_cast<std::uint64_t>(x.value - 1) ^
      static_cast<std::uint64_t>(y.value - 1);
  return std::bit_width(diff);
}

// The member of the depth-r partition containing x.
inline BlockRange ball(SiteIndex x, int r) {
  check_site(x);
  if (r < 0 || r > x.level)
    throw std::invalid_argument("ball radius must be in [0, level]");
  const std::int64_t width = std::int64_t{1} << r;
  const std::int64_t start = ((x.value - 1) / width) * width + 1;
  return {start, start + width - 1, r};
}

// The full depth-r partition of {1..2^n}, in increasing order.
inline std::vector<BlockRange> blocks(int n, int r) {
  const std::int64_t size = sites_at_level(n);
  if (r < 0 || r > n)
    throw std::invalid_argument("partition depth must be in [0, n]");
  const std::int64_t width = std::int64_t{1} << r;
  std::vector<BlockRange> out;
  out.reserve(static_cast<std::size_t>(size / width));
  for (std::int64_t s = 1; s <= size; s += width)
    out.push_back({s, s + width - 1, r});
  return out;
}

}  // namespace umlab
