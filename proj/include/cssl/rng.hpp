#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

// Counter-based stream derivation: every stochastic call owns a stream seeded
// from (master seed, purpose tag, item index). Streams are independent of
// call order, so datasets and training runs reproduce bit-for-bit regardless
// of how the work is scheduled. Only fully specified generators are used
// (mt19937_64 plus hand-rolled uniform/normal/categorical), because the
// std::*_distribution algorithms are implementation-defined.

namespace cssl::rng {

// splitmix64 finalizer; decorrelates nearby inputs.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t derive(std::uint64_t master, std::string_view purpose,
                            std::uint64_t index) {
  return mix(mix(master ^ mix(fnv1a(purpose))) ^ mix(index));
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1); safe to pass through log().
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the pair's second value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double t = 2.0 * 3.141592653589793 * uniform();
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform in [0, n); rejection sampling avoids modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t r = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
    const std::uint64_t max_ok = UINT64_MAX - r;
    std::uint64_t x = gen_();
    while (x > max_ok) x = gen_();
    return x % n;
  }

  // Inverse-CDF draw; the last index absorbs rounding residue.
  int categorical_from_log_probs(std::span<const double> log_p) {
    const double u = uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < log_p.size(); ++i) {
      cum += std::exp(log_p[i]);
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(log_p.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle(std::vector<T>& v, Stream& stream) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[stream.below(i)]);
  }
}

}  // namespace cssl::rng
