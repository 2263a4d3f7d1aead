// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "diversity.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "rng.hpp"

namespace dpl {

namespace {

// ---------------------------------------------------------------------
// Oracle: a from-scratch re-implementation of the objective, templated on
// the scalar type so finite differences can run in extended precision.
// It deliberately shares no code with the production forward/backward.
// ---------------------------------------------------------------------

template <typename S>
struct OracleParams {
  std::size_t d_in = 0, d = 0, num_classes = 0, hidden = 0;
  std::vector<S> proj_w;  // d x d_in
  std::vector<S> proj_b;  // d
  std::vector<S> protos;  // num_classes x d
  std::vector<S> w1;      // hidden x d
  std::vector<S> b1;      // hidden
  std::vector<S> w2;      // d x hidden
  std::vector<S> b2;      // d
  S a = 1, b = 0;
  S sigma2_floor = S(1e-3);
};

template <typename S>
OracleParams<S> promote(const ModelState& model) {
  OracleParams<S> p;
  p.d_in = model.dims.d_in;
  p.d = model.dims.d;
  p.num_classes = model.dims.num_classes;
  p.hidden = model.dims.hidden;
  auto conv = [](const std::vector<double>& v) {
    std::vector<S> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = S(v[i]);
    return out;
  };
  p.proj_w = conv(model.projector.weight.values);
  p.proj_b = conv(model.projector.bias);
  p.protos = conv(model.prototypes.c.values);
  p.w1 = conv(model.variance_net.w1.values);
  p.b1 = conv(model.variance_net.b1);
  p.w2 = conv(model.variance_net.w2.values);
  p.b2 = conv(model.variance_net.b2);
  p.a = S(model.scales.a);
  p.b = S(model.scales.b);
  p.sigma2_floor = S(model.variance_net.sigma2_floor);
  return p;
}

template <typename S>
S oracle_softplus(S x) {
  if (x > S(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

struct OracleInstance {
  std::vector<Vector> features;       // batch, raw space
  std::vector<std::uint32_t> labels;  // batch
  std::map<std::uint32_t, Matrix> epsilons;
  double alpha = 10.0;
  double radius = 1.0;
};

template <typename S>
struct OracleLosses {
  S ce = 0, ortho = 0, match = 0;
};

// `sampling_protos`, when given, replaces the prototype values inside the
// sample construction only; that is the stop-gradient reading of the
// detached configuration.
template <typename S>
OracleLosses<S> oracle_eval(const OracleParams<S>& p,
                            const OracleInstance& inst,
                            const std::vector<S>* sampling_protos) {
  OracleLosses<S> out;
  const std::size_t batch = inst.features.size();
  const std::vector<S>& sp = sampling_protos ? *sampling_protos : p.protos;

  // Per-class sigma and samples, for classes with epsilons.
  std::map<std::uint32_t, std::vector<S>> class_samples;  // N x d flattened
  for (const auto& [cls, eps] : inst.epsilons) {
    std::vector<S> hidden(p.hidden);
    for (std::size_t r = 0; r < p.hidden; ++r) {
      S acc = p.b1[r];
      for (std::size_t i = 0; i < p.d; ++i)
        acc += p.w1[r * p.d + i] * sp[cls * p.d + i];
      hidden[r] = acc > S(0) ? acc : S(0);
    }
    std::vector<S> sigma(p.d);
    for (std::size_t r = 0; r < p.d; ++r) {
      S acc = p.b2[r];
      for (std::size_t i = 0; i < p.hidden; ++i)
        acc += p.w2[r * p.hidden + i] * hidden[i];
      sigma[r] = std::sqrt(oracle_softplus(acc) + p.sigma2_floor);
    }
    std::vector<S> samples(eps.rows * p.d);
    for (std::size_t j = 0; j < eps.rows; ++j)
      for (std::size_t i = 0; i < p.d; ++i)
        samples[j * p.d + i] =
            sp[cls * p.d + i] + sigma[i] * S(eps.at(j, i));
    class_samples.emplace(cls, std::move(samples));
  }

  for (std::size_t n = 0; n < batch; ++n) {
    const Vector& feature = inst.features[n];
    std::vector<S> z(p.d);
    for (std::size_t r = 0; r < p.d; ++r) {
      S acc = p.proj_b[r];
      for (std::size_t i = 0; i < p.d_in; ++i)
        acc += p.proj_w[r * p.d_in + i] * S(feature[i]);
      z[r] = acc;
    }

    std::vector<S> logits(p.num_classes);
    for (std::size_t c = 0; c < p.num_classes; ++c) {
      S acc = S(0);
      for (std::size_t i = 0; i < p.d; ++i) {
        const S diff = z[i] - p.protos[c * p.d + i];
        acc += diff * diff;
      }
      logits[c] = -p.a * std::sqrt(acc) + p.b;
    }
    S lmax = logits[0];
    for (S l : logits) lmax = std::max(lmax, l);
    S sum = S(0);
    for (S l : logits) sum += std::exp(l - lmax);
    out.ce += std::log(sum) + lmax - logits[inst.labels[n]];

    const auto& samples = class_samples.at(inst.labels[n]);
    const std::size_t count = samples.size() / p.d;
    S best = std::numeric_limits<S>::infinity();
    for (std::size_t j = 0; j < count; ++j) {
      S acc = S(0);
      for (std::size_t i = 0; i < p.d; ++i) {
        const S diff = z[i] - samples[j * p.d + i];
        acc += diff * diff;
      }
      best = std::min(best, std::sqrt(acc));
    }
    const S hinge = best - S(inst.radius);
    if (hinge > S(0)) out.match += hinge * hinge;
  }
  out.ce /= S(batch);
  out.match /= S(batch);

  for (std::size_t i = 0; i < p.num_classes; ++i)
    for (std::size_t j = 0; j < p.num_classes; ++j) {
      if (i == j) continue;
      S acc = S(0);
      for (std::size_t k = 0; k < p.d; ++k)
        acc += p.protos[i * p.d + k] * p.protos[j * p.d + k];
      out.ortho += acc < S(0) ? -acc : acc;
    }
  out.ortho /= S(p.num_classes) * S(p.num_classes - 1);
  return out;
}

// ---------------------------------------------------------------------
// Instance construction with smoothness margins.
// ---------------------------------------------------------------------

struct CheckSetup {
  ModelState model;
  OracleInstance inst;
  SampleSetMap samplesets;
  std::size_t active_hinges = 0;
};

constexpr std::size_t kDIn = 16;
constexpr std::size_t kD = 8;
constexpr std::size_t kClasses = 5;
constexpr std::size_t kBatch = 16;
constexpr std::size_t kSamples = 4;

bool margins_hold(const CheckSetup& setup) {
  const auto& model = setup.model;

  // Sign margins for the orthogonal-loss subgradient.
  const auto& c = model.prototypes.c;
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = i + 1; j < c.rows; ++j)
      if (std::abs(dot(c.row(i), c.row(j))) < 1e-3) return false;

  // Relu kink margins in the variance net, for every class.
  for (std::size_t cls = 0; cls < model.dims.num_classes; ++cls) {
    const auto& vn = model.variance_net;
    const auto proto = c.row(cls);
    for (std::size_t r = 0; r < vn.w1.rows; ++r) {
      double acc = vn.b1[r];
      for (std::size_t i = 0; i < vn.w1.cols; ++i)
        acc += vn.w1.at(r, i) * proto[i];
      if (std::abs(acc) < 1e-3) return false;
    }
  }

  for (std::size_t n = 0; n < setup.inst.features.size(); ++n) {
    const Vector z = project(model, setup.inst.features[n]);
    const Vector dist = prototype_distances(model, z);
    for (double dv : dist)
      if (dv < 1e-2) return false;

    const auto& samples =
        setup.samplesets.at(setup.inst.labels[n]).samples;
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    for (std::size_t j = 0; j < samples.rows; ++j) {
      const double dj = euclidean_distance(z, samples.row(j));
      if (dj < best) {
        second = best;
        best = dj;
      } else {
        second = std::min(second, dj);
      }
    }
    if (best < 1e-2) return false;
    if (second - best < 1e-3) return false;       // argmin tie margin
    if (std::abs(best - setup.inst.radius) < 1e-2) return false;  // hinge edge
  }
  return true;
}

CheckSetup build_instance(std::uint64_t seed, std::uint32_t trial) {
  SeededRng rng(SeededRng::derive_seed(seed, trial));
  CheckSetup setup;
  setup.model = init_model(kDIn, kD, kClasses, rng);
  setup.inst.alpha = 10.0;
  setup.inst.radius = 1.0;
  for (std::size_t n = 0; n < kBatch; ++n) {
    Vector feature(kDIn);
    for (auto& x : feature) x = rng.next_gaussian();
    setup.inst.features.push_back(std::move(feature));
    setup.inst.labels.push_back(static_cast<std::uint32_t>(n % kClasses));
  }
  for (std::uint32_t cls = 0; cls < kClasses; ++cls) {
    Matrix eps(kSamples, kD);
    for (auto& v : eps.values) v = rng.next_gaussian();
    setup.inst.epsilons.emplace(cls, eps);
    setup.samplesets.emplace(cls,
                             samples_from_epsilons(setup.model, cls, eps));
  }
  for (std::size_t n = 0; n < kBatch; ++n) {
    const Vector z = project(setup.model, setup.inst.features[n]);
    const auto& samples = setup.samplesets.at(setup.inst.labels[n]).samples;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples.rows; ++j)
      best = std::min(best, euclidean_distance(z, samples.row(j)));
    if (best > setup.inst.radius) ++setup.active_hinges;
  }
  return setup;
}

double rel_err(double analytic, double fd) {
  const double denom =
      std::max(1e-8, std::abs(analytic) + std::abs(fd));
  return std::abs(analytic - fd) / denom;
}

struct GroupView {
  std::string name;
  const std::vector<double>* ce;
  const std::vector<double>* ortho;
  const std::vector<double>* match;  // alpha-scaled by caller
  std::vector<long double>* oracle;  // coordinates to perturb
};

}  // namespace

GradCheckReport run_grad_check(std::uint64_t seed,
                               bool detach_prototype_in_sampling) {
  GradCheckReport report;
  report.seed = seed;

  CheckSetup setup;
  std::uint32_t trial = 0;
  for (;; ++trial) {
    if (trial > 64)
      throw NumericError("grad-check: no well-conditioned instance found");
    setup = build_instance(seed, trial);
    if (setup.active_hinges >= kBatch / 4 && margins_hold(setup)) break;
  }
  report.trial = trial;
  report.active_hinges = setup.active_hinges;

  // Analytic gradients.
  std::vector<TrainingExample> batch;
  for (std::size_t n = 0; n < kBatch; ++n)
    batch.push_back(TrainingExample{&setup.inst.features[n],
                                    setup.inst.labels[n]});
  ObjectiveConfig config;
  config.alpha = setup.inst.alpha;
  config.radius = setup.inst.radius;
  config.detach_prototype_in_sampling = detach_prototype_in_sampling;
  ComponentGradients parts =
      backward_components(setup.model, batch, setup.samplesets, config);
  parts.match_grads.scale_by(config.alpha);  // check the alpha-scaled term

  OracleParams<long double> oracle = promote<long double>(setup.model);
  // Frozen prototype copy for the stop-gradient variant.
  const std::vector<long double> frozen_protos = oracle.protos;
  const std::vector<long double>* sampling_protos =
      detach_prototype_in_sampling ? &frozen_protos : nullptr;

  auto scalars_ce = std::vector<double>{parts.ce_grads.a};
  auto scalars_b_ce = std::vector<double>{parts.ce_grads.b};
  std::vector<double> a_ortho{parts.ortho_grads.a}, b_ortho{parts.ortho_grads.b};
  std::vector<double> a_match{parts.match_grads.a}, b_match{parts.match_grads.b};
  std::vector<long double> a_view{oracle.a}, b_view{oracle.b};

  std::vector<GroupView> groups = {
      {"proj_weight", &parts.ce_grads.proj_weight.values,
       &parts.ortho_grads.proj_weight.values,
       &parts.match_grads.proj_weight.values, &oracle.proj_w},
      {"proj_bias", &parts.ce_grads.proj_bias, &parts.ortho_grads.proj_bias,
       &parts.match_grads.proj_bias, &oracle.proj_b},
      {"prototypes", &parts.ce_grads.prototypes.values,
       &parts.ortho_grads.prototypes.values,
       &parts.match_grads.prototypes.values, &oracle.protos},
      {"vn_w1", &parts.ce_grads.vn_w1.values, &parts.ortho_grads.vn_w1.values,
       &parts.match_grads.vn_w1.values, &oracle.w1},
      {"vn_b1", &parts.ce_grads.vn_b1, &parts.ortho_grads.vn_b1,
       &parts.match_grads.vn_b1, &oracle.b1},
      {"vn_w2", &parts.ce_grads.vn_w2.values, &parts.ortho_grads.vn_w2.values,
       &parts.match_grads.vn_w2.values, &oracle.w2},
      {"vn_b2", &parts.ce_grads.vn_b2, &parts.ortho_grads.vn_b2,
       &parts.match_grads.vn_b2, &oracle.b2},
      {"a", &scalars_ce, &a_ortho, &a_match, &a_view},
      {"b", &scalars_b_ce, &b_ortho, &b_match, &b_view},
  };

  const long double h = 1e-5L;
  const long double alpha = setup.inst.alpha;
  report.step = static_cast<double>(h);
  report.pass = true;

  for (auto& group : groups) {
    GradCheckCell ce_cell{group.name, "ce", 0.0, true};
    GradCheckCell ortho_cell{group.name, "ortho", 0.0, true};
    GradCheckCell match_cell{group.name, "match", 0.0, true};
    GradCheckCell total_cell{group.name, "total", 0.0, true};

    for (std::size_t i = 0; i < group.oracle->size(); ++i) {
      long double& coord = (*group.oracle)[i];
      const long double base = coord;
      // Scalars a and b live in copies; point the oracle at them.
      if (group.name == "a") oracle.a = base;
      if (group.name == "b") oracle.b = base;

      auto eval_at = [&](long double value) {
        coord = value;
        if (group.name == "a") oracle.a = value;
        if (group.name == "b") oracle.b = value;
        return oracle_eval(oracle, setup.inst, sampling_protos);
      };
      const auto plus = eval_at(base + h);
      const auto minus = eval_at(base - h);
      coord = base;
      if (group.name == "a") oracle.a = base;
      if (group.name == "b") oracle.b = base;

      const double fd_ce = static_cast<double>((plus.ce - minus.ce) / (2 * h));
      const double fd_ortho =
          static_cast<double>((plus.ortho - minus.ortho) / (2 * h));
      const double fd_match = static_cast<double>(
          alpha * (plus.match - minus.match) / (2 * h));
      const double fd_total = fd_ce + fd_ortho + fd_match;

      const double an_ce = (*group.ce)[i];
      const double an_ortho = (*group.ortho)[i];
      const double an_match = (*group.match)[i];
      const double an_total = an_ce + an_ortho + an_match;

      ce_cell.max_rel_err = std::max(ce_cell.max_rel_err, rel_err(an_ce, fd_ce));
      ortho_cell.max_rel_err =
          std::max(ortho_cell.max_rel_err, rel_err(an_ortho, fd_ortho));
      match_cell.max_rel_err =
          std::max(match_cell.max_rel_err, rel_err(an_match, fd_match));
      total_cell.max_rel_err =
          std::max(total_cell.max_rel_err, rel_err(an_total, fd_total));
    }

    for (GradCheckCell* cell :
         {&ce_cell, &ortho_cell, &match_cell, &total_cell}) {
      cell->pass = cell->max_rel_err <= report.tolerance;
      report.max_rel_err = std::max(report.max_rel_err, cell->max_rel_err);
      report.pass = report.pass && cell->pass;
      report.cells.push_back(*cell);
    }
  }
  return report;
}

std::string GradCheckReport::to_json() const {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["trial"] = trial;
  doc["h"] = step;
  doc["tolerance"] = tolerance;
  doc["active_hinges"] = active_hinges;
  doc["pass"] = pass;
  doc["max_rel_err"] = max_rel_err;
  doc["cells"] = nlohmann::json::array();
  for (const auto& cell : cells)
    doc["cells"].push_back({{"group", cell.group},
                            {"component", cell.component},
                            {"max_rel_err", cell.max_rel_err},
                            {"pass", cell.pass}});
  return doc.dump(2);
}

}  // namespace dpl
