#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mkfusion {

// splitmix64 mixing of (seed, stream) so independent consumers get
// independent engines from one user-facing seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic random source. Every draw goes through the raw 64-bit engine
// so results do not depend on the standard library's distribution classes,
// and the full state can be captured as text for checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; no cached second value.
  double normal();

  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mkfusion
