// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "diversity.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "inference.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "rng.hpp"
#include "trainer.hpp"
#include "vec.hpp"

namespace dpl {

namespace {

class Harness {
 public:
  explicit Harness(std::vector<VerifyCheck>& out) : out_(out) {}

  void run(const std::string& name, const std::function<void()>& body) {
    VerifyCheck check;
    check.name = name;
    try {
      body();
      check.pass = true;
    } catch (const std::exception& e) {
      check.pass = false;
      check.detail = e.what();
    }
    out_.push_back(check);
  }

 private:
  std::vector<VerifyCheck>& out_;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw NumericError(msg);
}

void require_close(double actual, double expected, double tol,
                   const std::string& what) {
  if (!(std::abs(actual - expected) <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << actual << ", expected " << expected
       << " (tol " << tol << ")";
    throw NumericError(os.str());
  }
}

template <typename Fn>
void require_throws(Fn&& fn, const std::string& what) {
  try {
    fn();
  } catch (const Error&) {
    return;
  }
  throw NumericError(what + ": expected an error, none was thrown");
}

// Small hand-built model: two unit prototypes on the axes of a 2-d space,
// identity-ish projector, zero variance net (sigma^2 = ln 2 + floor).
ModelState axis_model(double a = 1.0, double b = 0.0) {
  ModelState m;
  m.dims = ModelDims{2, 2, 2, 2};
  m.projector.weight = Matrix(2, 2);
  m.projector.weight.at(0, 0) = 1.0;
  m.projector.weight.at(1, 1) = 1.0;
  m.projector.bias = Vector(2, 0.0);
  m.prototypes.c = Matrix(2, 2);
  m.prototypes.c.at(0, 0) = 1.0;
  m.prototypes.c.at(1, 1) = 1.0;
  m.variance_net.w1 = Matrix(2, 2);
  m.variance_net.b1 = Vector(2, 0.0);
  m.variance_net.w2 = Matrix(2, 2);
  m.variance_net.b2 = Vector(2, 0.0);
  m.variance_net.sigma2_floor = 1e-3;
  m.scales = ScaleParams{a, b};
  return m;
}

SampleSet manual_samples(std::uint32_t cls, std::vector<Vector> rows) {
  SampleSet set;
  set.class_index = cls;
  set.samples = Matrix(rows.size(), rows.front().size());
  set.epsilons = Matrix(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < rows[j].size(); ++i)
      set.samples.at(j, i) = rows[j][i];
  return set;
}

}  // namespace

VerifyReport run_verification() {
  VerifyReport report;
  Harness h(report.checks);

  // ---- softmax -------------------------------------------------------
  h.run("softmax uniform symmetry", [] {
    const Vector p = softmax({0.0, 0.0, 0.0});
    for (double v : p) require_close(v, 1.0 / 3.0, 1e-15, "entry");
  });
  h.run("softmax shift invariance", [] {
    SeededRng rng(11);
    for (int t = 0; t < 50; ++t) {
      Vector v(8), shifted(8);
      const double c = 20.0 * (rng.next_uniform() - 0.5);
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = 10.0 * (rng.next_uniform() - 0.5);
        shifted[i] = v[i] + c;
      }
      const Vector p = softmax(v), q = softmax(shifted);
      for (std::size_t i = 0; i < v.size(); ++i)
        require_close(p[i], q[i], 1e-12, "shifted entry");
    }
  });
  h.run("softmax exponent identity", [] {
    const Vector p =
        softmax({std::log(1.0), std::log(2.0), std::log(3.0)});
    require_close(p[0], 1.0 / 6.0, 1e-12, "p0");
    require_close(p[1], 2.0 / 6.0, 1e-12, "p1");
    require_close(p[2], 3.0 / 6.0, 1e-12, "p2");
  });
  h.run("softmax sums to one up to |v| = 700", [] {
    SeededRng rng(12);
    for (int t = 0; t < 200; ++t) {
      Vector v(6);
      for (auto& x : v) x = 1400.0 * (rng.next_uniform() - 0.5);
      const Vector p = softmax(v);
      double sum = 0.0;
      for (double x : p) sum += x;
      require_close(sum, 1.0, 1e-12, "sum");

      Vector moderate(6);
      for (auto& x : moderate) x = 700.0 * (rng.next_uniform() - 0.5);
      for (double x : softmax(moderate))
        require(x > 0.0, "softmax entry not positive");
    }
  });

  // ---- euclidean distance -------------------------------------------
  h.run("distance reference values", [] {
    require_close(euclidean_distance(Vector{1, 0}, Vector{0, 1}),
                  std::sqrt(2.0), 1e-15, "sqrt2");
    require_close(euclidean_distance(Vector{3, 4}, Vector{0, 0}), 5.0, 0.0,
                  "3-4-5");
    const Vector v{0.1, -2.5, 3.25};
    require_close(euclidean_distance(v, v), 0.0, 0.0, "identity");
    require_throws(
        [] { euclidean_distance(Vector{1.0}, Vector{1.0, 2.0}); },
        "dimension mismatch");
  });
  h.run("distance triangle inequality", [] {
    SeededRng rng(13);
    for (int t = 0; t < 200; ++t) {
      Vector u(5), v(5), w(5);
      for (std::size_t i = 0; i < 5; ++i) {
        u[i] = rng.next_gaussian();
        v[i] = rng.next_gaussian();
        w[i] = rng.next_gaussian();
      }
      require(euclidean_distance(u, w) <=
                  euclidean_distance(u, v) + euclidean_distance(v, w) + 1e-9,
              "triangle inequality violated");
    }
  });

  // ---- l2 normalize ---------------------------------------------------
  h.run("l2 normalize", [] {
    const Vector n = l2_normalized({3.0, 4.0});
    require_close(n[0], 0.6, 1e-15, "x");
    require_close(n[1], 0.8, 1e-15, "y");
    const Vector unit = l2_normalized({1.0, 0.0});
    require_close(unit[0], 1.0, 0.0, "idempotent");
    require_throws([] { l2_normalized({0.0, 0.0}); }, "zero vector");
  });

  // ---- finite differences --------------------------------------------
  h.run("finite difference oracle on known functions", [] {
    auto square = [](const Vector& x) { return x[0] * x[0]; };
    const Vector g1 = finite_diff_grad(square, {3.0}, 1e-5);
    require_close(g1[0], 6.0, 1e-6, "d/dx x^2 at 3");
    auto constant = [](const Vector&) { return 4.25; };
    const Vector g2 = finite_diff_grad(constant, {1.0, 2.0}, 1e-5);
    require_close(g2[0], 0.0, 0.0, "constant x");
    require_close(g2[1], 0.0, 0.0, "constant y");
    auto bilinear = [](const Vector& x) { return x[0] * x[1]; };
    const Vector g3 = finite_diff_grad(bilinear, {2.0, 3.0}, 1e-5);
    require_close(g3[0], 3.0, 1e-9, "d/dx xy");
    require_close(g3[1], 2.0, 1e-9, "d/dy xy");
  });

  // ---- rng -------------------------------------------------------------
  h.run("rng streams are seed-deterministic", [] {
    SeededRng a(42), b(42);
    for (int i = 0; i < 1000; ++i)
      require(a.next_u64() == b.next_u64(), "u64 stream diverged");
    SeededRng c(42), d(42);
    for (int i = 0; i < 1000; ++i)
      require(c.next_gaussian() == d.next_gaussian(),
              "gaussian stream diverged");
  });
  h.run("rng gaussian moments", [] {
    SeededRng rng(2024);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.next_gaussian();
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    require_close(mean, 0.0, 0.02, "sample mean");
    require_close(var, 1.0, 0.03, "sample variance");
  });

  // ---- projector -------------------------------------------------------
  h.run("projector identity, bias, linearity", [] {
    ModelState m = axis_model();
    const Vector r{0.3, -1.7};
    const Vector z = project(m, r);
    require_close(z[0], r[0], 0.0, "identity x");
    require_close(z[1], r[1], 0.0, "identity y");

    ModelState bias_only = axis_model();
    bias_only.projector.weight = Matrix(2, 2, 0.0);
    bias_only.projector.bias = Vector{2.5, -1.0};
    const Vector zb = project(bias_only, r);
    require_close(zb[0], 2.5, 0.0, "bias x");
    require_close(zb[1], -1.0, 0.0, "bias y");

    SeededRng rng(5);
    ModelState lin = axis_model();
    for (auto& w : lin.projector.weight.values) w = rng.next_gaussian();
    const Vector r1{1.25, -0.5}, r2{0.75, 2.0};
    const double al = 1.5, be = -2.25;
    Vector combo(2);
    for (int i = 0; i < 2; ++i) combo[i] = al * r1[i] + be * r2[i];
    const Vector lhs = project(lin, combo);
    const Vector z1 = project(lin, r1), z2 = project(lin, r2);
    for (int i = 0; i < 2; ++i)
      require_close(lhs[i], al * z1[i] + be * z2[i], 1e-12, "linearity");
  });

  // ---- distance logits --------------------------------------------------
  h.run("distance logits reference values", [] {
    ModelState m = axis_model();
    const Vector at_proto{1.0, 0.0};
    require_close(distance_logits(m, at_proto)[0], 0.0, 0.0, "zero distance");
    const Vector mid{0.5, 0.5};  // equidistant
    const Vector p = softmax(distance_logits(m, mid));
    require_close(p[0], 0.5, 1e-15, "tie p0");
    require_close(p[1], 0.5, 1e-15, "tie p1");
    const Vector origin{0.0, 0.0};
    require_close(distance_logits(m, origin)[0], -1.0, 0.0,
                  "unit distance logit");
    const Vector far{1.0 + std::sqrt(2.0), 0.0};
    require_close(distance_logits(m, far)[0], -std::sqrt(2.0), 1e-15,
                  "sqrt2 logit");
  });

  // ---- variance net ------------------------------------------------------
  h.run("variance net softplus reference and floor", [] {
    ModelState m = axis_model();  // all-zero variance net
    const Vector v = variance_of(m, 0);
    for (double x : v)
      require_close(x, std::log(2.0) + 1e-3, 1e-12, "softplus(0)+floor");

    ModelState low = axis_model();
    low.variance_net.b2 = Vector(2, -40.0);  // softplus -> 0 limit
    const Vector vf = variance_of(low, 0);
    for (double x : vf) {
      require(x >= 1e-3, "floor violated");
      require_close(x, 1e-3, 1e-12, "floor limit");
    }

    ModelState inc = axis_model();
    inc.variance_net.b2 = Vector{-1.0, 1.0};
    const Vector vi = variance_of(inc, 0);
    require(vi[0] < vi[1], "softplus not monotone in preactivation");
  });
  h.run("variance strictly positive on random parameters", [] {
    SeededRng rng(77);
    for (int t = 0; t < 20; ++t) {
      ModelState m = init_model(6, 5, 3, rng);
      for (auto& w : m.variance_net.b2) w = 6.0 * (rng.next_uniform() - 0.5);
      for (std::size_t c = 0; c < 3; ++c)
        for (double x : variance_of(m, c))
          require(x > 0.0, "variance coordinate not positive");
    }
  });

  // ---- prototype renormalization ----------------------------------------
  h.run("prototype renormalization", [] {
    ModelState m = axis_model();
    m.prototypes.c.at(0, 0) = 3.0;
    m.prototypes.c.at(0, 1) = 4.0;
    renormalize_prototypes(m);
    require_close(m.prototypes.c.at(0, 0), 0.6, 1e-15, "row0 x");
    require_close(m.prototypes.c.at(0, 1), 0.8, 1e-15, "row0 y");
    const double before = m.prototypes.c.at(1, 1);
    renormalize_prototypes(m);
    require_close(m.prototypes.c.at(1, 1), before, 0.0, "idempotent");
    m.prototypes.c.at(1, 0) = 0.0;
    m.prototypes.c.at(1, 1) = 0.0;
    require_throws([&m] { renormalize_prototypes(m); }, "zero row");
  });

  // ---- sampling -----------------------------------------------------------
  h.run("degenerate sampling hooks collapse to the prototype", [] {
    ModelState m = axis_model();
    const Matrix zeros(4, 2, 0.0);
    const SampleSet set = samples_from_epsilons(m, 0, zeros);
    for (std::size_t j = 0; j < set.samples.rows; ++j) {
      require_close(set.samples.at(j, 0), 1.0, 0.0, "row = c");
      require_close(set.samples.at(j, 1), 0.0, 0.0, "row = c");
    }
  });
  h.run("fresh draws differ call to call", [] {
    ModelState m = axis_model();
    SeededRng rng(9);
    const SampleSet s1 = draw_samples(m, 0, 5, rng);
    const SampleSet s2 = draw_samples(m, 0, 5, rng);
    require(s1.samples.values != s2.samples.values,
            "two draws produced identical samples");
    require_throws([&] { draw_samples(m, 0, 0, rng); }, "n = 0");
  });

  // ---- matching loss --------------------------------------------------------
  h.run("matching loss reference values", [] {
    SampleSetMap sets;
    sets.emplace(0, manual_samples(0, {{0.5, 0.0}, {3.0, 0.0}}));
    const Vector origin{0.0, 0.0};
    std::vector<BatchExample> one{{origin, 0}};
    require_close(matching_loss(one, sets, 1.0), 0.0, 0.0, "hinge inactive");

    SampleSetMap far;
    far.emplace(0, manual_samples(0, {{2.0, 0.0}}));
    require_close(matching_loss(one, far, 1.0), 1.0, 1e-12, "(2-1)^2");

    SampleSetMap mid;
    mid.emplace(0, manual_samples(0, {{1.3, 0.0}}));
    require_close(matching_loss(one, mid, 1.0), 0.09, 1e-9, "(0.3)^2");

    SampleSetMap both;
    both.emplace(0, manual_samples(0, {{0.5, 0.0}}));
    both.emplace(1, manual_samples(1, {{1.3, 0.0}}));
    std::vector<BatchExample> two{{origin, 0}, {origin, 1}};
    require_close(matching_loss(two, both, 1.0), 0.045, 1e-9, "batch mean");
  });
  h.run("matching loss sample-permutation invariance", [] {
    SeededRng rng(31);
    for (int t = 0; t < 20; ++t) {
      std::vector<Vector> rows;
      for (int j = 0; j < 6; ++j)
        rows.push_back({rng.next_gaussian(), rng.next_gaussian()});
      std::vector<Vector> shuffled = rows;
      std::reverse(shuffled.begin(), shuffled.end());
      SampleSetMap a, b;
      a.emplace(0, manual_samples(0, rows));
      b.emplace(0, manual_samples(0, shuffled));
      const Vector z{rng.next_gaussian(), rng.next_gaussian()};
      std::vector<BatchExample> batch{{z, 0}};
      require_close(matching_loss(batch, a, 1.0),
                    matching_loss(batch, b, 1.0), 0.0, "permutation");
    }
  });
  h.run("matching loss is zero iff every instance is covered", [] {
    SeededRng rng(33);
    for (int t = 0; t < 50; ++t) {
      std::vector<Vector> rows;
      for (int j = 0; j < 3; ++j)
        rows.push_back({2.0 * rng.next_gaussian(), 2.0 * rng.next_gaussian()});
      SampleSetMap sets;
      sets.emplace(0, manual_samples(0, rows));
      const Vector z{2.0 * rng.next_gaussian(), 2.0 * rng.next_gaussian()};
      std::vector<BatchExample> batch{{z, 0}};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& row : rows)
        best = std::min(best, euclidean_distance(z, row));
      const double loss = matching_loss(batch, sets, 1.0);
      require((loss == 0.0) == (best <= 1.0), "hinge condition mismatch");
    }
  });

  // ---- orthogonal loss ---------------------------------------------------
  h.run("orthogonal loss reference values", [] {
    PrototypeBank ortho;
    ortho.c = Matrix(3, 3, 0.0);
    for (int i = 0; i < 3; ++i) ortho.c.at(i, i) = 1.0;
    require_close(orthogonal_loss(ortho), 0.0, 0.0, "orthonormal");

    PrototypeBank twin;
    twin.c = Matrix(2, 2, 0.0);
    twin.c.at(0, 0) = 1.0;
    twin.c.at(1, 0) = 1.0;
    require_close(orthogonal_loss(twin), 1.0, 1e-15, "identical pair");

    // Three unit vectors with pairwise dot products exactly 0.5.
    PrototypeBank cone;
    cone.c = Matrix(3, 3, 0.0);
    cone.c.at(0, 0) = 1.0;
    cone.c.at(1, 0) = 0.5;
    cone.c.at(1, 1) = std::sqrt(3.0) / 2.0;
    cone.c.at(2, 0) = 0.5;
    cone.c.at(2, 1) = std::sqrt(3.0) / 6.0;
    cone.c.at(2, 2) = std::sqrt(2.0 / 3.0);
    require_close(orthogonal_loss(cone), 0.5, 1e-12, "pairwise 0.5");
    require_throws(
        [] {
          PrototypeBank single;
          single.c = Matrix(1, 2, 1.0);
          orthogonal_loss(single);
        },
        "|P| < 2");
  });
  h.run("orthogonal loss bounded by [0,1] for unit rows", [] {
    SeededRng rng(41);
    for (int t = 0; t < 30; ++t) {
      PrototypeBank bank;
      bank.c = Matrix(5, 4);
      for (auto& v : bank.c.values) v = rng.next_gaussian();
      ModelState m;
      m.prototypes = bank;
      renormalize_prototypes(m);
      const double loss = orthogonal_loss(m.prototypes);
      require(loss >= 0.0 && loss <= 1.0 + 1e-12, "outside [0,1]");
    }
  });

  // ---- cross entropy --------------------------------------------------------
  h.run("cross entropy reference values", [] {
    // Saturated probability: z on the label prototype with a huge sharpness.
    ModelState sat = axis_model(1000.0, 0.0);
    require_close(ce_loss(sat, Vector{1.0, 0.0}, 0), 0.0, 1e-12, "saturated");

    // Uniform over 4 classes.
    ModelState quad;
    quad = axis_model();
    quad.dims = ModelDims{2, 2, 4, 2};
    quad.prototypes.c = Matrix(4, 2, 0.0);
    quad.prototypes.c.at(0, 0) = 1.0;
    quad.prototypes.c.at(1, 0) = -1.0;
    quad.prototypes.c.at(2, 1) = 1.0;
    quad.prototypes.c.at(3, 1) = -1.0;
    require_close(ce_loss(quad, Vector{0.0, 0.0}, 2), std::log(4.0), 1e-12,
                  "uniform ln 4");

    // Two classes at distances (0, 1).
    ModelState two = axis_model();
    two.prototypes.c.at(1, 0) = 1.0;  // c1 = (1, 1): distance 1 from z = c0
    require_close(ce_loss(two, Vector{1.0, 0.0}, 0), 0.31326168751822286,
                  1e-9, "log(1+e^-1)");
  });
  h.run("cross entropy shift invariance in b and nonnegativity", [] {
    SeededRng rng(55);
    for (int t = 0; t < 30; ++t) {
      ModelState m = init_model(6, 4, 5, rng);
      const Vector r{rng.next_gaussian(), rng.next_gaussian(),
                     rng.next_gaussian(), rng.next_gaussian(),
                     rng.next_gaussian(), rng.next_gaussian()};
      const Vector z = project(m, r);
      const double base = ce_loss(m, z, t % 5);
      require(base >= 0.0, "ce < 0");
      m.scales.b = 7.5;
      require_close(ce_loss(m, z, t % 5), base, 1e-12, "b shift");
    }
  });

  // ---- total loss -------------------------------------------------------------
  h.run("total loss composition", [] {
    require_close(total_loss(1.0, 0.5, 0.2, 10.0), 3.5, 0.0, "alpha 10");
    require_close(total_loss(1.2, 0.3, 9.0, 0.0), 1.5, 0.0, "alpha 0");
    require_close(total_loss(0.0, 0.0, 0.0, 10.0), 0.0, 0.0, "zeros");
  });
  h.run("loss breakdown identity", [] {
    SeededRng rng(66);
    ModelState m = init_model(6, 4, 3, rng);
    std::vector<Vector> feats;
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 5; ++i) {
      Vector f(6);
      for (auto& x : f) x = rng.next_gaussian();
      feats.push_back(std::move(f));
    }
    for (int i = 0; i < 5; ++i)
      batch.push_back({&feats[i], static_cast<std::uint32_t>(i % 3)});
    SampleSetMap sets;
    for (std::uint32_t c = 0; c < 3; ++c)
      sets.emplace(c, draw_samples(m, c, 4, rng));
    ObjectiveConfig config;
    const BackwardResult res = backward(m, batch, sets, config);
    require_close(res.losses.total,
                  res.losses.ce + res.losses.ortho +
                      config.alpha * res.losses.match,
                  1e-12, "total = ce + ortho + alpha match");
  });

  // ---- gradient edge cases ----------------------------------------------------
  h.run("saturated softmax has zero ce gradient", [] {
    ModelState m = axis_model(1000.0, 0.0);
    Vector feat{1.0, 0.0};
    std::vector<TrainingExample> batch{{&feat, 0}};
    SampleSetMap sets;
    sets.emplace(0, manual_samples(0, {{1.0, 0.0}}));
    ObjectiveConfig config;
    const ComponentGradients parts =
        backward_components(m, batch, sets, config);
    require(parts.ce_grads.max_abs() <= 1e-12, "ce gradient not ~0");
  });
  h.run("inactive hinge has zero matching gradient", [] {
    ModelState m = axis_model();
    Vector feat{0.9, 0.0};
    std::vector<TrainingExample> batch{{&feat, 0}};
    SampleSetMap sets;
    sets.emplace(0, manual_samples(0, {{1.0, 0.0}}));  // within R of z
    ObjectiveConfig config;
    const ComponentGradients parts =
        backward_components(m, batch, sets, config);
    require(parts.match == 0.0, "match loss not zero");
    require(parts.match_grads.max_abs() == 0.0, "match gradient not zero");
  });

  // ---- inference identities ------------------------------------------------------
  h.run("sigma = 1 reduces unbiased to biased", [] {
    SeededRng rng(101);
    ModelState m = init_model(16, 16, 4, rng);
    SigmaHook hook;
    hook.force_unit_sigma = true;
    for (int t = 0; t < 1000; ++t) {
      Vector z(16);
      for (auto& x : z) x = 2.0 * rng.next_gaussian();
      const InferenceTrace biased = biased_probabilities(m, z);
      const InferenceTrace unbiased = unbiased_probabilities(m, z, hook);
      for (std::size_t i = 0; i < biased.logits.size(); ++i)
        require_close(unbiased.logits[i], biased.logits[i], 1e-9, "logit");
      require(predict(biased) == predict(unbiased), "argmax changed");
      require_close(unbiased.a_prime, m.scales.a, 0.0, "a' = a");
    }
  });
  h.run("sigma rescaling leaves unbiased logits unchanged", [] {
    SeededRng rng(102);
    ModelState m = init_model(16, 16, 4, rng);
    for (const double kappa : {0.1, 10.0}) {
      SigmaHook hook;
      hook.sigma_scale = kappa;
      for (int t = 0; t < 500; ++t) {
        Vector z(16);
        for (auto& x : z) x = 2.0 * rng.next_gaussian();
        const InferenceTrace base = unbiased_probabilities(m, z);
        const InferenceTrace scaled = unbiased_probabilities(m, z, hook);
        for (std::size_t i = 0; i < base.logits.size(); ++i)
          require_close(scaled.logits[i], base.logits[i], 1e-9, "logit");
        require(predict(base) == predict(scaled), "argmax changed");
        require_close(scaled.a_prime, kappa * base.a_prime,
                      1e-9 * std::abs(base.a_prime) * kappa, "a' scaling");
      }
    }
  });
  h.run("a-prime rescale reference value", [] {
    // Raw distances (4, 6), sigma = 2 everywhere: a' = 1 * 4 / 2 = 2.
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
    const InferenceTrace trace =
        unbiased_probabilities(m, Vector{-3.0}, hook);
    require_close(trace.raw_distances[0], 4.0, 0.0, "raw max");
    require_close(trace.normalized_distances[0], 2.0, 0.0, "normalized");
    require_close(trace.a_prime, 2.0, 0.0, "a'");
  });
  h.run("predict argmax and tie rule", [] {
    InferenceTrace t;
    t.probabilities = {0.1, 0.7, 0.2};
    require(predict(t) == 1, "argmax");
    t.probabilities = {0.5, 0.5};
    require(predict(t) == 0, "tie -> lowest index");
    t.probabilities = {0.0, 0.0, 1.0};
    require(predict(t) == 2, "one-hot");
  });
  h.run("argmax invariant under softmax", [] {
    SeededRng rng(103);
    for (int t = 0; t < 200; ++t) {
      Vector logits(7);
      for (auto& x : logits) x = 5.0 * rng.next_gaussian();
      const Vector p = softmax(logits);
      const auto arg_logits = static_cast<std::size_t>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
      const auto arg_probs = static_cast<std::size_t>(
          std::max_element(p.begin(), p.end()) - p.begin());
      require(arg_logits == arg_probs, "argmax differs");
    }
  });
  h.run("distance logits invariant under joint rotation", [] {
    SeededRng rng(104);
    const std::size_t d = 8;
    ModelState m = init_model(d, d, 5, rng);
    // Random rotation via Gram-Schmidt.
    std::vector<Vector> q;
    while (q.size() < d) {
      Vector v(d);
      for (auto& x : v) x = rng.next_gaussian();
      for (const auto& u : q) {
        const double proj = dot(v, u);
        for (std::size_t i = 0; i < d; ++i) v[i] -= proj * u[i];
      }
      q.push_back(l2_normalized(v));
    }
    auto rotate = [&q, d](std::span<const double> v) {
      Vector out(d);
      for (std::size_t r = 0; r < d; ++r) out[r] = dot(q[r], v);
      return out;
    };
    ModelState rotated = m;
    for (std::size_t i = 0; i < 5; ++i) {
      const Vector row = rotate(m.prototypes.c.row(i));
      for (std::size_t k = 0; k < d; ++k) rotated.prototypes.c.at(i, k) = row[k];
    }
    for (int t = 0; t < 50; ++t) {
      Vector z(d);
      for (auto& x : z) x = rng.next_gaussian();
      const Vector lhs = distance_logits(m, z);
      const Vector rhs = distance_logits(rotated, rotate(z));
      for (std::size_t i = 0; i < lhs.size(); ++i)
        require_close(rhs[i], lhs[i], 1e-9, "rotated logit");
    }
  });

  // ---- sgd ---------------------------------------------------------------------
  h.run("sgd reference updates", [] {
    SeededRng rng(105);
    ModelState m = init_model(4, 3, 2, rng);
    GradientBuffer g = GradientBuffer::zeros_like(m);
    g.a = 0.5;
    SgdOptimizer opt(m, 0.01, 0.0);
    opt.step(m, g);
    require_close(m.scales.a, 0.995, 0.0, "a update");

    ModelState frozen = init_model(4, 3, 2, rng);
    const ModelState before = frozen;
    SgdOptimizer noop(frozen, 0.0, 0.0);
    GradientBuffer big = GradientBuffer::zeros_like(frozen);
    big.a = 100.0;
    for (auto& v : big.proj_weight.values) v = 3.0;
    noop.step(frozen, big);
    require_close(frozen.scales.a, before.scales.a, 0.0, "lr 0 scalar");
    for (std::size_t i = 0; i < before.projector.weight.values.size(); ++i)
      require_close(frozen.projector.weight.values[i],
                    before.projector.weight.values[i], 0.0, "lr 0 weight");
    for (std::size_t i = 0; i < before.prototypes.c.values.size(); ++i)
      require_close(frozen.prototypes.c.values[i],
                    before.prototypes.c.values[i], 1e-15, "lr 0 prototype");

    // Two zero-momentum steps equal one combined step on scalar params.
    ModelState two = init_model(4, 3, 2, rng);
    ModelState one = two;
    SgdOptimizer opt2(two, 0.1, 0.0);
    GradientBuffer g1 = GradientBuffer::zeros_like(two);
    GradientBuffer g2 = GradientBuffer::zeros_like(two);
    g1.a = 0.25;
    g2.a = -0.75;
    opt2.step(two, g1);
    opt2.step(two, g2);
    SgdOptimizer opt1(one, 0.1, 0.0);
    GradientBuffer sum = GradientBuffer::zeros_like(one);
    sum.a = 0.25 - 0.75;
    opt1.step(one, sum);
    require_close(two.scales.a, one.scales.a, 1e-12, "two-step linearity");
  });

  // ---- metrics -------------------------------------------------------------------
  h.run("metrics reference values", [] {
    std::vector<std::uint32_t> perfect{0, 1, 2, 0, 1, 2};
    const auto cm = confusion_matrix(perfect, perfect, 3);
    const auto rep = metrics_report(cm, "biased");
    require_close(rep.micro_recall, 1.0, 0.0, "micro");
    require_close(rep.mean_recall, 1.0, 0.0, "mean");
    require_close(rep.harmonic_f, 1.0, 0.0, "harmonic");

    // 90 instances of class 0, 10 of class 1, predictor always answers 0.
    std::vector<std::uint32_t> labels, preds;
    for (int i = 0; i < 90; ++i) labels.push_back(0);
    for (int i = 0; i < 10; ++i) labels.push_back(1);
    preds.assign(100, 0);
    const auto rep2 = metrics_report(confusion_matrix(preds, labels, 2), "x");
    require_close(rep2.micro_recall, 0.9, 1e-15, "micro 0.9");
    require_close(rep2.mean_recall, 0.5, 1e-15, "mean 0.5");
    require_close(rep2.harmonic_f, 0.6428571428571429, 1e-12, "harmonic");

    // Class 2 absent from the split.
    const auto rep3 =
        metrics_report(confusion_matrix(preds, labels, 3), "x");
    require(rep3.present_classes == std::vector<std::uint32_t>({0, 1}),
            "present classes");
    require(std::isnan(rep3.per_class_recall[2]), "absent class recall");
  });
  h.run("harmonic mean inequalities", [] {
    SeededRng rng(106);
    for (int t = 0; t < 200; ++t) {
      const double x = rng.next_uniform() * 0.99 + 0.005;
      const double y = rng.next_uniform() * 0.99 + 0.005;
      const double harm = 2.0 * x * y / (x + y);
      require(harm <= 0.5 * (x + y) + 1e-12, "harmonic > arithmetic");
      require(harm <= std::sqrt(x * y) + 1e-12, "harmonic > geometric");
      const double same = 2.0 * x * x / (x + x);
      require_close(same, x, 1e-15, "harmonic of equal values");
    }
  });
  h.run("grouped recall reference values", [] {
    auto make_trace = [](std::uint32_t cls, std::size_t n, double conf) {
      InferenceTrace t;
      t.probabilities.assign(n, (1.0 - conf) / static_cast<double>(n - 1));
      t.probabilities[cls] = conf;
      return t;
    };
    Dataset small;
    small.num_classes = 2;
    small.feature_dim = 1;
    std::vector<InferenceTrace> traces;
    for (int i = 0; i < 3; ++i) {
      small.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
      traces.push_back(make_trace(1, 2, 0.9));
    }
    require_close(recall_at_k_grouped(small, traces, 5), 1.0, 0.0,
                  "small group, large K");

    Dataset ten;
    ten.num_classes = 2;
    ten.feature_dim = 1;
    std::vector<InferenceTrace> ten_traces;
    for (int i = 0; i < 10; ++i) {
      ten.instances.push_back({static_cast<std::uint64_t>(i), 0, 1, {0.0}});
      ten_traces.push_back(make_trace(1, 2, 0.9));
    }
    require_close(recall_at_k_grouped(ten, ten_traces, 5), 0.5, 0.0,
                  "K caps recall");

    std::vector<InferenceTrace> wrong;
    for (int i = 0; i < 10; ++i) wrong.push_back(make_trace(0, 2, 0.9));
    require_close(recall_at_k_grouped(ten, wrong, 5), 0.0, 0.0,
                  "no correct predictions");
  });
  h.run("grouped recall with large K equals per-group micro average", [] {
    SeededRng rng(107);
    Dataset ds;
    ds.num_classes = 3;
    ds.feature_dim = 1;
    std::vector<InferenceTrace> traces;
    std::size_t max_group = 0;
    for (int i = 0; i < 60; ++i) {
      LabeledInstance inst;
      inst.id = i;
      inst.group = static_cast<std::uint32_t>(rng.next_below(7));
      inst.label = static_cast<std::uint32_t>(rng.next_below(3));
      inst.feature = {0.0};
      ds.instances.push_back(inst);
      InferenceTrace t;
      t.probabilities = softmax({rng.next_gaussian(), rng.next_gaussian(),
                                 rng.next_gaussian()});
      traces.push_back(t);
    }
    std::map<std::uint32_t, std::pair<std::uint64_t, std::uint64_t>> by_group;
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
      auto& [correct, count] = by_group[ds.instances[i].group];
      max_group = std::max(max_group, static_cast<std::size_t>(++count));
      if (predict(traces[i]) == ds.instances[i].label) ++correct;
    }
    double expected = 0.0;
    for (const auto& [g, cc] : by_group)
      expected += static_cast<double>(cc.first) / static_cast<double>(cc.second);
    expected /= static_cast<double>(by_group.size());
    require_close(
        recall_at_k_grouped(ds, traces, static_cast<int>(max_group)),
        expected, 1e-15, "identity");
  });

  // ---- data plumbing ----------------------------------------------------------
  h.run("synthetic generator counts and determinism", [] {
    const GeneratorSpec desk = GeneratorSpec::desk_default(1);
    const Dataset a = generate_synthetic(desk);
    const Dataset b = generate_synthetic(desk);
    require(a.size() == 4680, "total count");
    const auto counts = a.class_counts();
    require(counts[0] == 4500 && counts[1] == 90 && counts[2] == 60 &&
                counts[3] == 30,
            "coarse counts");
    for (std::size_t i = 0; i < a.size(); ++i)
      require(a.instances[i].feature == b.instances[i].feature,
              "generation not bit-deterministic");

    GeneratorSpec exact;
    exact.fine_means = {{1.0, 2.0}, {-3.0, 0.5}};
    exact.fine_stddev = {0.0, 0.0};
    exact.fine_counts = {3, 2};
    exact.fine_to_coarse = {0, 1};
    exact.group_size = 2;
    exact.seed = 9;
    const Dataset zero = generate_synthetic(exact);
    for (std::size_t i = 0; i < zero.size(); ++i)
      require(zero.instances[i].feature ==
                  exact.fine_means[zero.instances[i].label],
              "zero-stddev features must equal cluster means");
  });
  h.run("seeded split is deterministic and exact", [] {
    GeneratorSpec spec;
    spec.fine_means = {{0.0}, {5.0}};
    spec.fine_stddev = {0.1, 0.1};
    spec.fine_counts = {60, 40};
    spec.fine_to_coarse = {0, 1};
    spec.seed = 3;
    const Dataset ds = generate_synthetic(spec);
    const auto [train1, test1] = split(ds, 0.7, 11);
    const auto [train2, test2] = split(ds, 0.7, 11);
    require(train1.size() == 70 && test1.size() == 30, "70/30 split");
    for (std::size_t i = 0; i < train1.size(); ++i)
      require(train1.instances[i].id == train2.instances[i].id,
              "split not deterministic");
    require_throws([&] { split(ds, 1.0, 1); }, "train_frac = 1");
  });

  // ---- training contract ---------------------------------------------------------
  h.run("training determinism and prototype constraint", [] {
    GeneratorSpec spec;
    spec.fine_means = {{2.0, 0.0, 0.0, 0.0}, {0.0, 2.0, 0.0, 0.0},
                       {0.0, 0.0, 2.0, 0.0}};
    spec.fine_stddev = {0.3, 0.3, 0.3};
    spec.fine_counts = {60, 25, 15};
    spec.fine_to_coarse = {0, 1, 2};
    spec.seed = 5;
    const Dataset ds = generate_synthetic(spec);

    RunConfig config;
    config.d_in = 4;
    config.d = 4;
    config.num_classes = 3;
    config.steps = 300;
    config.log_interval = 50;
    config.seed = 17;
    const TrainResult run1 = train(config, ds);
    const TrainResult run2 = train(config, ds);
    require(checkpoint_to_json(run1.model) == checkpoint_to_json(run2.model),
            "reruns differ");
    require(!run1.history.records.empty(), "history empty");
    require(run1.history.records.front().step == 0, "first record step");
    require(std::isfinite(run1.history.records.front().losses.total) &&
                run1.history.records.front().losses.total > 0.0,
            "loss at step 0");
    for (const auto& rec : run1.history.records)
      require(rec.proto_norm_max_dev <= 1e-9, "prototype norm drifted");

    RunConfig zero_steps = config;
    zero_steps.steps = 0;
    const TrainResult none = train(zero_steps, ds);
    SeededRng rng(config.seed);
    const ModelState fresh = init_model(4, 4, 3, rng, config.sigma2_floor);
    require(checkpoint_to_json(none.model) == checkpoint_to_json(fresh),
            "steps = 0 must return the initial model");
  });

  report.pass = true;
  for (const auto& check : report.checks) report.pass = report.pass && check.pass;
  return report;
}

std::string VerifyReport::to_json() const {
  nlohmann::json doc;
  doc["pass"] = pass;
  doc["checks"] = nlohmann::json::array();
  for (const auto& check : checks) {
    nlohmann::json c = {{"name", check.name}, {"pass", check.pass}};
    if (!check.detail.empty()) c["detail"] = check.detail;
    doc["checks"].push_back(c);
  }
  return doc.dump(2);
}

}  // namespace dpl
