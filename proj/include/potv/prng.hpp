// ============================================================================
// prng.hpp -- portable counter-based pseudorandom streams (splitmix64)
//
// Every source of randomness in the toolkit goes through these streams so
// that runs are reproducible bit-for-bit from a 64-bit seed. Substreams are
// derived from (seed, tag) pairs; the same (seed, tag) always yields the
// same sequence on every platform.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace potv {

/// One mixing round of splitmix64 (Steele, Lea & Flood's SplittableRandom
/// finalizer). Pure function of the input word.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over a string tag, used to key substreams by purpose.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based splitmix64 stream. Output i is mix(state0 + i*gamma), so a
/// stream can be split or skipped without iterating.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Substream derived from (seed, tag); independent of draws made on the
  /// parent before or after.
  Rng(std::uint64_t seed, std::string_view tag)
      : state_(splitmix64_mix(seed ^ fnv1a64(tag))) {}

  /// Child stream keyed by an index (trial number, chip index, ...).
  Rng child(std::uint64_t index) const {
    return Rng(splitmix64_mix(state_ ^ splitmix64_mix(index ^ 0xd6e8feb86659fd93ULL)));
  }
  Rng child(std::string_view tag) const { return Rng(state_ ^ fnv1a64(tag), tag); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1], safe as a log() argument.
  double next_double_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0. Uses rejection to stay unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: empty range");
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (explicit, so results are portable;
  /// std::normal_distribution is implementation-defined).
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Exponential with the given rate.
  double next_exponential(double rate) { return -std::log(next_double_open()) / rate; }

  /// Bernoulli(p).
  bool next_bernoulli(double p) { return next_double() < p; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Event times of a homogeneous Poisson process with the given rate on
/// [t0, t1), in increasing order. This is the snapshot-timing primitive
/// shared by the chip model and the fleet simulator.
inline std::vector<double> poisson_event_times(Rng& rng, double rate, double t0, double t1) {
  std::vector<double> times;
  double t = t0;
  for (;;) {
    t += rng.next_exponential(rate);
    if (t >= t1) break;
    times.push_back(t);
  }
  return times;
}

}  // namespace potv
