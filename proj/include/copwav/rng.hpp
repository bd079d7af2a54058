#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace copwav {

//! Counter-based SplitMix64 generator with splittable streams.
//!
//! State advances by the 64-bit golden-ratio increment and is scrambled by
//! the usual two-round finalizer, so every (seed, stream) pair yields an
//! independent, platform-stable sequence. Streams are cheap: the harness
//! keys one stream per (n-index, replication) task.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : state_(mix(seed + kGamma) ^ mix(stream ^ 0xd1b54a32d192ed03ULL)) {}

  //! Next raw 64-bit word.
  std::uint64_t next_u64() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  //! Uniform draw strictly inside (0,1): 53-bit mantissa, offset half an ulp.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 12) * 0x1.0p-52 + 0x1.0p-53;
  }

  //! Standard normal via Box-Muller; pairs are cached.
  double normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * kPi * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  //! Gamma(shape, 1) by Marsaglia-Tsang squeeze; shape < 1 boosted through
  //! Gamma(shape+1) times U^{1/shape}.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  //! Collision-free stream id for a (group, member) task pair.
  static constexpr std::uint64_t stream_key(std::uint64_t group, std::uint64_t member) noexcept {
    return (group << 32) | (member & 0xffffffffULL);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr double kPi = 3.141592653589793;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace copwav
