#pragma once

#include <cstdint>
#include <limits>

namespace ibf {

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// (master_seed, stream index) without any sequential state.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of substream `index` of `master`. Two-level hashing keeps
/// substreams of neighbouring masters uncorrelated.
constexpr std::uint64_t substream_seed(std::uint64_t master,
                                       std::uint64_t index) noexcept {
  return mix64(mix64(master + 0x9e3779b97f4a7c15ULL) ^
               (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

/// xoshiro256++ generator with a portable standard-normal sampler.
/// Satisfies UniformRandomBitGenerator; output is identical on every
/// platform for a given seed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  /// Independent generator for replica/stream `index`.
  static Rng substream(std::uint64_t master, std::uint64_t index) noexcept {
    return Rng(substream_seed(master, index));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal (Marsaglia polar method, spare value cached).
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ibf
