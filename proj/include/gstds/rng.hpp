#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace gstds {

// Counter-based deterministic stream built on splitmix64. Streams derived
// from the same master seed but different (a, b) labels are independent,
// so per-(epoch, batch) selection can run in any order.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(seed), stream_id_(seed) {}

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static RngStream derive(uint64_t master, uint64_t a, uint64_t b) {
    uint64_t id = mix(mix(master ^ (a * 0xd1342543de82ef95ull)) ^
                      (b * 0x2545f4914f6cdd1dull));
    RngStream s(id);
    s.stream_id_ = id;
    return s;
  }

  uint64_t stream_id() const { return stream_id_; }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1); never returns 0 so u^(1/w) keys stay positive.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  uint64_t stream_id_;
};

}  // namespace gstds
