#pragma once

#include <array>
#include <cstdint>

namespace umlab {

// Philox-4x64 block cipher with 10 rounds, the counter-based generator also
// used by numpy. A 256-bit counter plus a 128-bit key map to four output
// words; distinct counters give independent values, so streams can be
// addressed rather than advanced.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter counter, Key key);
};

// Namespaces the key space so unrelated consumers can never collide even if
// they share a master seed and happen to use the same (trial, level, block)
// coordinates.
enum class StreamKind : std::uint64_t {
  matrix_blocks = 1,  // Gaussian matrix entries
  site_picks = 2,     // per-trial probe site selection
  internal = 3,       // solver-internal noise (inverse iteration starts)
  synthetic = 4,      // test fixtures
};

// One addressable random substream. The address (seed, kind, trial, level,
// block) pins the entire sequence: values depend only on the address and the
// draw index, never on scheduling or on other streams. Word 0 of the counter
// is the running block index; words 1..3 carry the address.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, StreamKind kind, std::uint64_t trial,
            std::uint64_t level, std::uint64_t block);

  std::uint64_t next_u64();

  // uniform on [0,1) with 53 random bits, matching the usual u64>>11 mapping
  double next_uniform();

  // standard normal via the Marsaglia polar method (caches its pair partner)
  double next_gaussian();

  // uniform integer on [0, bound) by rejection, exact for any bound > 0
  std::uint64_t next_below(std::uint64_t bound);

 private:
  void refill();

  Philox4x64::Key key_;
  Philox4x64::Counter base_;
  std::uint64_t block_index_ = 0;
  Philox4x64::Counter buffer_{};
  int buffer_pos_ = 4;  // empty
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace umlab
