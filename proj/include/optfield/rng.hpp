#pragma once

#include <cstdint>

namespace optfield {

/// Stream identifiers mixed into seeds so that independent consumers of the
/// same user seed never share random numbers.
enum class StreamTag : std::uint64_t {
  kSample = 1,
  kSource = 2,
  kTarget = 3,
  kTime = 4,
  kMixtureComponent = 5,
  kBootstrap = 6,
  kEpoch = 7,
  kEvaluation = 8,
  kDirection = 9,
  kPotential = 10,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from (seed, tag). Pure; used to split one user seed
/// into independent sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Counter-based generator. Each (seed, tag, index) triple addresses its own
/// stream, so per-row draws do not depend on evaluation order or thread count.
/// Output is bit-identical across platforms: no std:: distributions are used.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  static Rng stream(std::uint64_t seed, StreamTag tag, std::uint64_t index);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1).
  double uniform_open();
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace optfield
