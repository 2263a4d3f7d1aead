// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "vec.hpp"

namespace dpl {

// Synthetic long-tailed dataset spec. Several fine-grained clusters can map
// to one coarse label, which is how a label with diverse underlying
// semantics is modelled.
struct GeneratorSpec {
  std::vector<Vector> fine_means;            // one mean per fine cluster
  std::vector<double> fine_stddev;           // isotropic stddev per cluster
  std::vector<std::size_t> fine_counts;      // instances per cluster
  std::vector<std::uint32_t> fine_to_coarse; // fine index -> coarse label
  std::size_t group_size = 12;               // instances per pseudo-scene
  std::uint64_t seed = 1;

  std::size_t feature_dim() const {
    return fine_means.empty() ? 0 : fine_means.front().size();
  }
  std::uint32_t num_classes() const;

  /// Throws ConfigError on inconsistent shapes, non-surjective coarse map,
  /// zero counts, or negative stddev.
  void validate() const;

  /// The built-in desk-scale generator: 6 fine clusters in 64 dimensions
  /// coarsened into 4 classes with counts [1500,1500,1500,90,60,30]. The
  /// geometry is fixed; `seed` only drives the instance noise.
  static GeneratorSpec desk_default(std::uint64_t seed);

  /// Parses either a full spec document or {"preset":"desk","seed":...}
  /// with optional field overrides.
  static GeneratorSpec from_json(const std::string& text);
  std::string to_json() const;
};

/// Draws every instance of cluster k as mean_k + stddev_k * eps with eps
/// i.i.d. standard normal from the seeded stream; groups are dealt
/// round-robin so each pseudo-scene mixes clusters.
Dataset generate_synthetic(const GeneratorSpec& spec);

}  // namespace dpl
