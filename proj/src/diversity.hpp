// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "vec.hpp"

namespace dpl {

// N reparameterized Gaussian samples around one prototype:
// row j = c_i + sigma_i (elementwise) * eps_j. The raw eps draws are kept
// so gradients can flow back through sigma and the mean.
struct SampleSet {
  std::uint32_t class_index = 0;
  Matrix samples;   // N x d
  Matrix epsilons;  // N x d
};

struct LossBreakdown {
  double ce = 0.0;
  double ortho = 0.0;
  double match = 0.0;
  double total = 0.0;
};

using SampleSetMap = std::map<std::uint32_t, SampleSet>;

/// Fresh draws each call; sigma_i = sqrt(variance_of(i)) elementwise.
SampleSet draw_samples(const ModelState& model, std::uint32_t class_index,
                       std::size_t n, SeededRng& rng);

/// Builds the sample set from caller-provided epsilons (test hook and
/// gradient-check support).
SampleSet samples_from_epsilons(const ModelState& model,
                                std::uint32_t class_index,
                                const Matrix& epsilons);

// One training example inside a batch: projected feature plus its label.
struct BatchExample {
  Vector z;
  std::uint32_t label = 0;
};

/// Squared hinge per example: (max(0, min_j ||z - s_k^(j)|| - radius))^2
/// where k is the example's label; returns the batch mean. Every labelled
/// class must have a sample set.
double matching_loss(std::span<const BatchExample> batch,
                     const SampleSetMap& samplesets, double radius);

/// Mean absolute pairwise dot product over ordered prototype pairs,
/// 1/(P(P-1)) sum_{i != j} |c_i . c_j|. Requires at least two prototypes.
double orthogonal_loss(const PrototypeBank& prototypes);

}  // namespace dpl
