#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "ope/errors.hpp"

namespace ope {

/// Named, splittable random stream.
///
/// Every consumer of randomness receives its own stream identified by a
/// (seed, purpose) pair; per-item child streams are derived by index with
/// `derive`. Streams never share state, so sampling trajectories for
/// different indices or seeds in parallel cannot change any result.
///
/// The core generator is xoshiro256++ seeded through splitmix64, with
/// explicit uniform/normal transforms instead of `std::` distributions so
/// that sequences are identical across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose)
      : label_(std::string(purpose) + "#" + std::to_string(seed)) {
    init_state(mix(seed, fnv1a(purpose)));
  }

  /// Child stream for item `index`; independent of draws made on the parent.
  [[nodiscard]] RngStream derive(std::uint64_t index) const {
    return RngStream(FromKey{}, mix(key_, splitmix(index + 0x9e3779b97f4a7c15ull)),
                     label_ + "/" + std::to_string(index));
  }

  /// Stream identifier, e.g. "trajectory#7/42". Stored as Trajectory::seed_tag.
  const std::string& label() const { return label_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire's unbiased multiply-shift rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw ParameterError("uniform_below: n must be positive");
    while (true) {
      const std::uint64_t x = next_u64();
      const __uint128_t m = static_cast<__uint128_t>(x) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        if (low < threshold) continue;
      }
      return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Index sampled from the categorical distribution `probs` (sums to ~1).
  /// CDF inversion with a fixed ascending accumulation order.
  int categorical(std::span<const double> probs) {
    const double u = uniform01();
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = static_cast<int>(i);
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    if (last_positive < 0)
      throw ParameterError("categorical: distribution has no positive mass");
    return last_positive;  // u fell into accumulated rounding slack
  }

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key, std::string label) : label_(std::move(label)) {
    init_state(key);
  }

  void init_state(std::uint64_t key) {
    key_ = key;
    std::uint64_t x = key;
    for (auto& word : state_) {
      x = splitmix_step(x);
      word = splitmix_mix(x);
    }
  }

  static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  static constexpr std::uint64_t splitmix_step(std::uint64_t x) {
    return x + 0x9e3779b97f4a7c15ull;
  }
  static constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static constexpr std::uint64_t splitmix(std::uint64_t x) {
    return splitmix_mix(splitmix_step(x));
  }
  static constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix_mix(splitmix_step(a) ^ rotl(b, 17));
  }
  static constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  std::uint64_t key_ = 0;
  std::uint64_t state_[4] = {};
  std::string label_;
};

}  // namespace ope
