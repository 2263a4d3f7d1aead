// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace dpl {

// Deterministic PRNG: xoshiro256++ seeded by splitmix64 expansion of a
// 64-bit seed. Gaussians come from Box-Muller with both outputs consumed
// in order, so a stream is fully determined by its seed.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double next_uniform();

  /// Standard normal variate (Box-Muller pair cache).
  double next_gaussian();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// splitmix64 mix of (seed, stream), for deriving independent sub-seeds.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dpl
