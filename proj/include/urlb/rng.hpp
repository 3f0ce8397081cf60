#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace urlb {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

// Counter-based random stream: every draw is a pure function of
// (seed, stream, counter), so independent named streams never perturb
// each other and runs replay bit-for-bit from the same seed.
struct RngStream {
  uint64_t seed = 0;
  uint64_t stream = 0;
  uint64_t counter = 0;

  RngStream() = default;
  explicit RngStream(uint64_t seed_, uint64_t stream_ = 0) : seed(seed_), stream(stream_) {}

  // Independent stream derived from a name; counter restarts at zero.
  RngStream fork(std::string_view name) const {
    return RngStream(seed, detail::mix64(stream ^ fnv1a64(name)));
  }

  uint64_t next_u64() {
    return detail::mix64(detail::mix64(seed ^ detail::mix64(stream)) + counter++);
  }

  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the paired draw is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  uint64_t uniform_index(uint64_t n) {
    return uint64_t((unsigned __int128)(next_u64()) * n >> 64);
  }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace urlb
