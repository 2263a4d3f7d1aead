// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <doctest.h>

#include "errors.hpp"
#include "generator.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace dpl;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() /
          (std::string("dpl_infer_") + std::to_string(::getpid()) + "_" +
           name))
      .string();
}

}  // namespace

TEST_CASE("biased probabilities") {
  SeededRng rng(1);
  const ModelState m = init_model(4, 4, 2, rng);

  // Equidistant query: both classes get one half.
  Vector mid(4);
  for (int i = 0; i < 4; ++i)
    mid[i] = 0.5 * (m.prototypes.c.at(0, i) + m.prototypes.c.at(1, i));
  const InferenceTrace trace = biased_probabilities(m, mid);
  CHECK(trace.probabilities[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(trace.probabilities[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(trace.a_prime == m.scales.a);

  double sum = 0.0;
  for (double p : trace.probabilities) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  // Growing sharpness drives the on-prototype probability toward one.
  Vector at(m.prototypes.c.row(0).begin(), m.prototypes.c.row(0).end());
  double last = 0.0;
  for (const double a : {1.0, 4.0, 16.0, 64.0}) {
    ModelState sharp = m;
    sharp.scales.a = a;
    const double p = biased_probabilities(sharp, at).probabilities[0];
    CHECK(p > last);
    last = p;
  }
  CHECK(last > 0.999);

  CHECK_THROWS_AS(biased_probabilities(m, Vector{1.0}), DimensionError);
}

TEST_CASE("unit sigma reduces unbiased inference to biased") {
  SeededRng rng(2);
  const ModelState m = init_model(8, 8, 5, rng);
  SigmaHook unit;
  unit.force_unit_sigma = true;
  for (int t = 0; t < 200; ++t) {
    Vector z(8);
    for (auto& x : z) x = 2.0 * rng.next_gaussian();
    const InferenceTrace biased = biased_probabilities(m, z);
    const InferenceTrace unbiased = unbiased_probabilities(m, z, unit);
    CHECK(unbiased.a_prime == m.scales.a);
    for (std::size_t i = 0; i < biased.logits.size(); ++i)
      CHECK(std::abs(unbiased.logits[i] - biased.logits[i]) <= 1e-9);
    CHECK(predict(unbiased) == predict(biased));
  }
}

TEST_CASE("sigma rescaling changes neither logits nor argmax") {
  SeededRng rng(3);
  const ModelState m = init_model(8, 8, 4, rng);
  for (const double kappa : {0.1, 10.0}) {
    SigmaHook hook;
    hook.sigma_scale = kappa;
    for (int t = 0; t < 100; ++t) {
      Vector z(8);
      for (auto& x : z) x = 2.0 * rng.next_gaussian();
      const InferenceTrace base = unbiased_probabilities(m, z);
      const InferenceTrace scaled = unbiased_probabilities(m, z, hook);
      for (std::size_t i = 0; i < base.logits.size(); ++i)
        CHECK(std::abs(scaled.logits[i] - base.logits[i]) <= 1e-9);
      CHECK(predict(scaled) == predict(base));
    }
  }
}

TEST_CASE("a-prime follows the max-distance ratio") {
  // Raw distances (4, 6); sigma = 2 -> normalized (2, 3); a' = 4/3... with
  // a = 1 and max ratio 6/3 = 2.
  ModelState m;
  m.dims = ModelDims{1, 1, 2, 1};
  m.projector.weight = Matrix(1, 1, 1.0);
  m.projector.bias = Vector(1, 0.0);
  m.prototypes.c = Matrix(2, 1);
  m.prototypes.c.at(0, 0) = 1.0;
  m.prototypes.c.at(1, 0) = 3.0;
  m.variance_net.w1 = Matrix(1, 1, 0.0);
  m.variance_net.b1 = Vector(1, 0.0);
  m.variance_net.w2 = Matrix(1, 1, 0.0);
  m.variance_net.b2 = Vector(1, 0.0);
  m.scales = ScaleParams{1.0, 0.0};

  SigmaHook hook;
  hook.force_unit_sigma = true;
  hook.sigma_scale = 2.0;
  const InferenceTrace trace = unbiased_probabilities(m, Vector{-3.0}, hook);
  CHECK(trace.raw_distances[0] == 4.0);
  CHECK(trace.raw_distances[1] == 6.0);
  CHECK(trace.normalized_distances[0] == 2.0);
  CHECK(trace.normalized_distances[1] == 3.0);
  CHECK(trace.a_prime == 2.0);
  CHECK(trace.a_prime > 0.0);

  // A query coincident with every prototype has no defined scores.
  ModelState twin = m;
  twin.prototypes.c.at(1, 0) = 1.0;
  CHECK_THROWS_AS(unbiased_probabilities(twin, Vector{1.0}, hook),
                  NumericError);
}

TEST_CASE("predict tie-breaking") {
  InferenceTrace t;
  t.probabilities = {0.1, 0.7, 0.2};
  CHECK(predict(t) == 1);
  t.probabilities = {0.5, 0.5};
  CHECK(predict(t) == 0);
  t.probabilities = {0.0, 0.0, 1.0};
  CHECK(predict(t) == 2);
  t.probabilities = {};
  CHECK_THROWS_AS(predict(t), ConfigError);
}

TEST_CASE("embedding export layout and determinism") {
  GeneratorSpec spec;
  spec.fine_means = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  spec.fine_stddev = {0.2, 0.2};
  spec.fine_counts = {10, 5};
  spec.fine_to_coarse = {0, 1};
  spec.seed = 4;
  const Dataset ds = generate_synthetic(spec);

  SeededRng rng(5);
  const ModelState m = init_model(3, 3, 2, rng);

  const std::string path = temp_file("emb.csv");
  export_embeddings(m, ds, path, 3, 77);
  const std::string bytes = read_bytes(path);

  // Header plus 2 prototypes + 15 features + 2 * 3 samples.
  std::size_t lines = 0;
  for (char c : bytes)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 + 15 + 6);
  CHECK(bytes.rfind("kind,class,label,pred_biased,pred_unbiased,v0,v1,v2,s0,s1,s2\n",
                    0) == 0);

  const std::string again = temp_file("emb2.csv");
  export_embeddings(m, ds, again, 3, 77);
  CHECK(read_bytes(again) == bytes);

  std::filesystem::remove(path);
  std::filesystem::remove(again);
}
