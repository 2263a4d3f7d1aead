// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vec.hpp"

namespace dpl {

// One raw relation feature with its class label and pseudo-scene group.
struct LabeledInstance {
  std::uint64_t id = 0;
  std::uint32_t group = 0;
  std::uint32_t label = 0;
  Vector feature;
};

struct Dataset {
  std::vector<LabeledInstance> instances;
  std::uint32_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<std::string> class_names;  // optional, may be empty

  // Fine-cluster provenance from the synthetic generator, parallel to
  // instances. Not part of any file format and never visible to the model;
  // kept so an evaluation harness can study recovery of fine semantics.
  std::vector<std::uint32_t> fine_labels;

  std::size_t size() const { return instances.size(); }

  /// Throws if empty, dimension-inconsistent, or labels out of range.
  void validate() const;

  std::vector<std::size_t> class_counts() const;
};

/// CSV with header `id,group,label,f0,...,f{D-1}`; 17-significant-digit
/// decimal floats so the round trip is value-exact.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

/// "DPLF" binary layout: magic, u32 version=1, u64 count, u32 feature_dim,
/// u32 num_classes, then per record u64 id, u32 group, u32 label and
/// feature_dim little-endian f32 values.
Dataset load_binary(const std::string& path);
void save_binary(const Dataset& dataset, const std::string& path);

/// Sniffs the DPLF magic and dispatches to the right loader.
Dataset load_dataset(const std::string& path);

/// Picks the format from the path suffix: ".csv" writes CSV, anything else
/// writes DPLF binary.
void save_dataset(const Dataset& dataset, const std::string& path);

/// Seeded shuffle followed by a prefix split; exact, deterministic partition.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_frac,
                                  std::uint64_t seed);

}  // namespace dpl
