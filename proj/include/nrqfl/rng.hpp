#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nrqfl {

/// SplitMix64 finalizer, used to turn structured keys into well-mixed seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and an ordered list of keys
/// (round, parameter index, client id, ...). Independent of call order.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream tags so that e.g. the partition stream and the selection stream of
/// one experiment never collide.
enum class StreamTag : std::uint64_t {
  kPartition = 1,
  kInitialModel = 2,
  kSelection = 3,
  kAggregation = 4,
  kCalibration = 5,
  kServer = 6,
  kClient = 7,
};

/// A seeded random stream. Each consumer owns its own instance.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  RngStream derive(std::initializer_list<std::uint64_t> keys) const {
    return RngStream(derive_seed(seed_, keys));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  engine_type& engine() noexcept { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

constexpr std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

}  // namespace nrqfl
