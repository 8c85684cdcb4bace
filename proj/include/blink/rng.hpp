#pragma once

#include <cstdint>

namespace blink {

// Counter-based splittable PRNG built on the splitmix64 finalizer.
// Streams are a pure function of (seed, path), so any consumer that derives
// its stream from a documented path is reproducible across runs and
// platforms. All draws use integer arithmetic plus a fixed u64->double
// mapping.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // uniform in [0,1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive on both ends
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream; does not disturb this stream's state.
  RngStream split(uint64_t stream_id) const {
    return RngStream(derive(state_, stream_id));
  }

  // Documented counter scheme: child seed = mix chain over (seed, a, b).
  static uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0x5eedull) {
    return mix(mix(seed ^ mix(a + 0x9e3779b97f4a7c15ull)) + mix(b));
  }

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
};

}  // namespace blink
