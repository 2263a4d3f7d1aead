// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "diversity.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace dpl {

SampleSet draw_samples(const ModelState& model, std::uint32_t class_index,
                       std::size_t n, SeededRng& rng) {
  if (n == 0)
    throw ConfigError("draw_samples: sample count must be >= 1");
  const std::size_t d = model.dims.d;
  Matrix eps(n, d);
  for (auto& v : eps.values) v = rng.next_gaussian();
  SampleSet set = samples_from_epsilons(model, class_index, eps);
  return set;
}

SampleSet samples_from_epsilons(const ModelState& model,
                                std::uint32_t class_index,
                                const Matrix& epsilons) {
  const auto& c = model.prototypes.c;
  if (class_index >= c.rows)
    throw IndexError("samples_from_epsilons: class index out of range");
  if (epsilons.cols != c.cols)
    throw DimensionError("samples_from_epsilons: epsilon dimension mismatch");

  const Vector sigma2 = variance_of(model, class_index);
  const auto proto = c.row(class_index);

  SampleSet set;
  set.class_index = class_index;
  set.epsilons = epsilons;
  set.samples = Matrix(epsilons.rows, epsilons.cols);
  for (std::size_t j = 0; j < epsilons.rows; ++j)
    for (std::size_t i = 0; i < epsilons.cols; ++i)
      set.samples.at(j, i) =
          proto[i] + std::sqrt(sigma2[i]) * epsilons.at(j, i);
  return set;
}

double matching_loss(std::span<const BatchExample> batch,
                     const SampleSetMap& samplesets, double radius) {
  if (!(radius > 0.0))
    throw ConfigError("matching_loss: radius must be positive");
  if (batch.empty())
    throw ConfigError("matching_loss: empty batch");

  double acc = 0.0;
  for (const auto& example : batch) {
    const auto it = samplesets.find(example.label);
    if (it == samplesets.end())
      throw ConfigError("matching_loss: no sample set for class " +
                        std::to_string(example.label));
    const auto& samples = it->second.samples;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples.rows; ++j)
      best = std::min(best, euclidean_distance(example.z, samples.row(j)));
    const double hinge = std::max(0.0, best - radius);
    acc += hinge * hinge;
  }
  return acc / static_cast<double>(batch.size());
}

double orthogonal_loss(const PrototypeBank& prototypes) {
  const auto& c = prototypes.c;
  if (c.rows < 2)
    throw ConfigError("orthogonal_loss: needs at least two prototypes");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.rows; ++j)
      if (i != j) acc += std::abs(dot(c.row(i), c.row(j)));
  const double pairs = static_cast<double>(c.rows) *
                       static_cast<double>(c.rows - 1);
  return acc / pairs;
}

}  // namespace dpl
