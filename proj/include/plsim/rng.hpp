#pragma once

#include <cstdint>
#include <string_view>

namespace plsim {

// Deterministic PRNG (xoshiro256**) so that a given (config, seed) replays
// bit-identically regardless of platform or standard library. All sampling
// helpers are implemented here instead of using <random> distributions,
// whose outputs are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform draw from [0, 1).
  double uniform01();
  // Uniform draw from [lo, hi); returns lo exactly when lo == hi.
  double uniform(double lo, double hi);
  // Box-Muller; sigma == 0 returns mean exactly (still consumes two draws).
  double normal(double mean, double sigma);
  // Knuth's method; fine for the small means used here. mean <= 0 yields 0.
  int poisson(double mean);
  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t bounded(std::uint64_t n);

 private:
  std::uint64_t s_[4];
};

// FNV-1a, used to fold string ids into seeds.
std::uint64_t hash_string(std::string_view s);

// splitmix64 finalizer over a ^ rotated b; order-sensitive on purpose.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Stream for one scene: independent of scene iteration order and of how many
// worker threads process the batch. `salt` separates uses (round, phase, ...).
Rng scene_rng(std::uint64_t master_seed, std::string_view scene_id, std::uint64_t salt);

}  // namespace plsim
