#pragma once

#include <cmath>
#include <cstdint>

namespace ucad {

// Counter-based splitmix64 stream. Identical seed + identical call sequence
// gives identical output on every platform, so runs are byte-reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  int next_int(int n) {
    double u = next_double();
    int v = static_cast<int>(u * n);
    return v < n ? v : n - 1;
  }

  // standard normal, Box-Muller with cached spare
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream; deterministic function of (seed, stream id).
  RngStream fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ ((stream + 1) * 0xD6E8FEB86659FD93ULL);
    z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ULL;
    z = z ^ (z >> 32);
    return RngStream(z);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ucad
