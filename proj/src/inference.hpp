// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "dataset.hpp"
#include "model.hpp"
#include "vec.hpp"

namespace dpl {

enum class InferenceMode { Biased, Unbiased };

InferenceMode inference_mode_from_string(const std::string& s);
const char* to_string(InferenceMode mode);

struct InferenceTrace {
  Vector raw_distances;         // ||z - c_j||
  Vector normalized_distances;  // ||(z - c_j) / sigma_j||
  double a_prime = 0.0;
  Vector logits;
  Vector probabilities;
};

// Test hooks for the inference-identity checks: force sigma to all-ones
// and/or rescale every sigma by a shared factor.
struct SigmaHook {
  bool force_unit_sigma = false;
  double sigma_scale = 1.0;
};

/// Scores from raw distances: softmax(-a ||z - c_j|| + b).
InferenceTrace biased_probabilities(const ModelState& model,
                                    std::span<const double> z);

/// Scores from sigma-normalized distances with the rescaled sharpness
/// a' = a * max_j raw / max_j normalized, computed per query.
InferenceTrace unbiased_probabilities(const ModelState& model,
                                      std::span<const double> z,
                                      const SigmaHook& hook = {});

InferenceTrace run_inference(const ModelState& model,
                             std::span<const double> z, InferenceMode mode);

/// Argmax with ties resolved to the lowest class index.
std::uint32_t predict(const InferenceTrace& trace);

/// CSV export of prototypes (with sigma), projected features (with labels
/// and both predictions) and optionally drawn samples per prototype.
/// Header: kind,class,label,pred_biased,pred_unbiased,v0..v{d-1},s0..s{d-1}.
void export_embeddings(const ModelState& model, const Dataset& dataset,
                       const std::string& path,
                       std::size_t samples_per_class = 0,
                       std::uint64_t sample_seed = 0);

}  // namespace dpl
