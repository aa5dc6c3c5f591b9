#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace visprompt {

/// Seedable xoshiro256++ generator with named child streams.
///
/// State update (all arithmetic mod 2^64, rotl = rotate left):
///
///     result = rotl(s0 + s3, 23) + s0
///     t = s1 << 17
///     s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3;  s2 ^= t;  s3 = rotl(s3, 45)
///
/// The four state words are filled from a 64-bit key by splitmix64. A stream
/// key is derived from (seed, purpose, index) by FNV-1a hashing the purpose
/// string and mixing the three values through splitmix64, so child streams
/// depend only on their identifiers and never on how much of the parent has
/// been consumed.
///
/// Distributions:
///   uniform(lo, hi)  lo + (hi - lo) * u, u = (next() >> 11) * 2^-53 in [0,1)
///   normal(mu, s)    Box-Muller cosine branch, one value per two uniforms
///   poisson(lambda)  Knuth's product method for lambda <= 30, otherwise
///                    max(0, round(lambda + sqrt(lambda) * z)), z ~ N(0,1)
class Rng {
 public:
  static constexpr double kPoissonExactLimit = 30.0;

  explicit Rng(std::uint64_t seed = 0);

  /// Stream for (seed, purpose, index).
  static Rng stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  /// Child stream keyed on this generator's key, independent of its state.
  Rng child(std::string_view purpose, std::uint64_t index = 0) const;

  std::uint64_t next();
  std::uint64_t key() const { return key_; }

  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mu = 0.0, double sigma = 1.0);
  std::int64_t poisson(double lambda);
  bool bernoulli(double p);

 private:
  std::uint64_t key_;
  std::array<std::uint64_t, 4> s_;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace visprompt
