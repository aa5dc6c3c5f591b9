#include "visprompt/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "visprompt/error.hpp"

namespace visprompt {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t st = a;
  std::uint64_t h = splitmix64(st);
  st = h ^ b;
  h = splitmix64(st);
  st = h ^ c;
  return splitmix64(st);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : key_(seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

Rng Rng::stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  return Rng(mix_key(seed, fnv1a64(purpose), index));
}

Rng Rng::child(std::string_view purpose, std::uint64_t index) const {
  return stream(key_, purpose, index);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("uniform: lo must not exceed hi");
  if (lo == hi) return lo;
  const double v = lo + (hi - lo) * uniform01();
  // Guard against rounding up to hi for tiny ranges.
  return v < hi ? v : std::nextafter(hi, lo);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ParameterError("uniform_int: lo must not exceed hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r = next();
  while (r >= limit) r = next();
  return lo + static_cast<std::int64_t>(r % span);
}

double Rng::normal(double mu, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("normal: sigma must be >= 0");
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mu + sigma * z;
}

std::int64_t Rng::poisson(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("poisson: lambda must be finite and >= 0");
  }
  if (lambda == 0.0) return 0;
  if (lambda <= kPoissonExactLimit) {
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }
  const double v = std::round(lambda + std::sqrt(lambda) * normal());
  return v < 0.0 ? 0 : static_cast<std::int64_t>(v);
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

}  // namespace visprompt
