// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "diversity.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace dpl {

InferenceMode inference_mode_from_string(const std::string& s) {
  if (s == "biased") return InferenceMode::Biased;
  if (s == "unbiased") return InferenceMode::Unbiased;
  throw ConfigError("unknown inference mode '" + s + "'");
}

const char* to_string(InferenceMode mode) {
  return mode == InferenceMode::Biased ? "biased" : "unbiased";
}

InferenceTrace biased_probabilities(const ModelState& model,
                                    std::span<const double> z) {
  InferenceTrace trace;
  trace.raw_distances = prototype_distances(model, z);
  trace.normalized_distances = trace.raw_distances;
  trace.a_prime = model.scales.a;
  trace.logits.resize(trace.raw_distances.size());
  for (std::size_t i = 0; i < trace.logits.size(); ++i)
    trace.logits[i] =
        -model.scales.a * trace.raw_distances[i] + model.scales.b;
  trace.probabilities = softmax(trace.logits);
  return trace;
}

InferenceTrace unbiased_probabilities(const ModelState& model,
                                      std::span<const double> z,
                                      const SigmaHook& hook) {
  const auto& c = model.prototypes.c;
  if (z.size() != c.cols)
    throw DimensionError("unbiased_probabilities: z dimension mismatch");

  InferenceTrace trace;
  trace.raw_distances = prototype_distances(model, z);
  trace.normalized_distances.resize(c.rows);
  for (std::size_t j = 0; j < c.rows; ++j) {
    Vector sigma(c.cols, 1.0);
    if (!hook.force_unit_sigma) {
      const Vector sigma2 = variance_of(model, j);
      for (std::size_t k = 0; k < c.cols; ++k) sigma[k] = std::sqrt(sigma2[k]);
    }
    if (hook.sigma_scale != 1.0)
      for (auto& s : sigma) s *= hook.sigma_scale;
    const auto proto = c.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < c.cols; ++k) {
      const double t = (z[k] - proto[k]) / sigma[k];
      acc += t * t;
    }
    trace.normalized_distances[j] = std::sqrt(acc);
  }

  const double max_raw =
      *std::max_element(trace.raw_distances.begin(), trace.raw_distances.end());
  const double max_norm = *std::max_element(trace.normalized_distances.begin(),
                                            trace.normalized_distances.end());
  if (max_raw == 0.0 || max_norm == 0.0)
    throw NumericError(
        "unbiased_probabilities: query coincides with every prototype");
  trace.a_prime = model.scales.a * (max_raw / max_norm);

  trace.logits.resize(c.rows);
  for (std::size_t j = 0; j < c.rows; ++j)
    trace.logits[j] =
        -trace.a_prime * trace.normalized_distances[j] + model.scales.b;
  trace.probabilities = softmax(trace.logits);
  return trace;
}

InferenceTrace run_inference(const ModelState& model,
                             std::span<const double> z, InferenceMode mode) {
  return mode == InferenceMode::Biased ? biased_probabilities(model, z)
                                       : unbiased_probabilities(model, z);
}

std::uint32_t predict(const InferenceTrace& trace) {
  if (trace.probabilities.empty())
    throw ConfigError("predict: empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < trace.probabilities.size(); ++i)
    if (trace.probabilities[i] > trace.probabilities[best]) best = i;
  return static_cast<std::uint32_t>(best);
}

namespace {

void write_value_cells(std::ofstream& out, std::span<const double> v) {
  char buf[64];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << ',' << buf;
  }
}

void write_empty_cells(std::ofstream& out, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) out << ',';
}

}  // namespace

void export_embeddings(const ModelState& model, const Dataset& dataset,
                       const std::string& path, std::size_t samples_per_class,
                       std::uint64_t sample_seed) {
  validate_shapes(model);
  dataset.validate();
  if (dataset.feature_dim != model.dims.d_in)
    throw FormatError("export_embeddings: dataset feature_dim " +
                      std::to_string(dataset.feature_dim) +
                      " does not match checkpoint d_in");

  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open '" + path + "' for writing");

  const std::size_t d = model.dims.d;
  out << "kind,class,label,pred_biased,pred_unbiased";
  for (std::size_t i = 0; i < d; ++i) out << ",v" << i;
  for (std::size_t i = 0; i < d; ++i) out << ",s" << i;
  out << '\n';

  for (std::size_t cls = 0; cls < model.dims.num_classes; ++cls) {
    const Vector sigma2 = variance_of(model, cls);
    Vector sigma(d);
    for (std::size_t k = 0; k < d; ++k) sigma[k] = std::sqrt(sigma2[k]);
    out << "prototype," << cls << ",,,";
    write_value_cells(out, model.prototypes.c.row(cls));
    write_value_cells(out, sigma);
    out << '\n';
  }

  for (const auto& inst : dataset.instances) {
    const Vector z = project(model, inst.feature);
    const auto biased = biased_probabilities(model, z);
    const auto unbiased = unbiased_probabilities(model, z);
    out << "feature,," << inst.label << ',' << predict(biased) << ','
        << predict(unbiased);
    write_value_cells(out, z);
    write_empty_cells(out, d);
    out << '\n';
  }

  if (samples_per_class > 0) {
    SeededRng rng(sample_seed);
    for (std::size_t cls = 0; cls < model.dims.num_classes; ++cls) {
      const SampleSet set =
          draw_samples(model, static_cast<std::uint32_t>(cls),
                       samples_per_class, rng);
      for (std::size_t j = 0; j < set.samples.rows; ++j) {
        out << "sample," << cls << ",,,";
        write_value_cells(out, set.samples.row(j));
        write_empty_cells(out, d);
        out << '\n';
      }
    }
  }
  if (!out)
    throw IoError("failed writing '" + path + "'");
}

}  // namespace dpl
