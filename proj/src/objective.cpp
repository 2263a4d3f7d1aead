// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#include "objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace dpl {

namespace {

// Smoothing for the 1/||.|| factors so a feature landing exactly on a
// prototype (or sample) cannot produce NaN; see the zero-noise synthetic
// data case.
constexpr double kDistEps = 1e-12;

}  // namespace

GradientBuffer GradientBuffer::zeros_like(const ModelState& model) {
  GradientBuffer g;
  g.proj_weight =
      Matrix(model.projector.weight.rows, model.projector.weight.cols);
  g.proj_bias = Vector(model.projector.bias.size(), 0.0);
  g.prototypes = Matrix(model.prototypes.c.rows, model.prototypes.c.cols);
  g.vn_w1 = Matrix(model.variance_net.w1.rows, model.variance_net.w1.cols);
  g.vn_b1 = Vector(model.variance_net.b1.size(), 0.0);
  g.vn_w2 = Matrix(model.variance_net.w2.rows, model.variance_net.w2.cols);
  g.vn_b2 = Vector(model.variance_net.b2.size(), 0.0);
  return g;
}

void GradientBuffer::accumulate(const GradientBuffer& other, double scale) {
  auto add_vec = [scale](Vector& dst, const Vector& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };
  auto add_mat = [scale](Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.values.size(); ++i)
      dst.values[i] += scale * src.values[i];
  };
  add_mat(proj_weight, other.proj_weight);
  add_vec(proj_bias, other.proj_bias);
  add_mat(prototypes, other.prototypes);
  add_mat(vn_w1, other.vn_w1);
  add_vec(vn_b1, other.vn_b1);
  add_mat(vn_w2, other.vn_w2);
  add_vec(vn_b2, other.vn_b2);
  a += scale * other.a;
  b += scale * other.b;
}

void GradientBuffer::scale_by(double s) {
  for (auto& v : proj_weight.values) v *= s;
  for (auto& v : proj_bias) v *= s;
  for (auto& v : prototypes.values) v *= s;
  for (auto& v : vn_w1.values) v *= s;
  for (auto& v : vn_b1) v *= s;
  for (auto& v : vn_w2.values) v *= s;
  for (auto& v : vn_b2) v *= s;
  a *= s;
  b *= s;
}

bool GradientBuffer::all_finite() const {
  return dpl::all_finite(proj_weight.values) && dpl::all_finite(proj_bias) &&
         dpl::all_finite(prototypes.values) && dpl::all_finite(vn_w1.values) &&
         dpl::all_finite(vn_b1) && dpl::all_finite(vn_w2.values) &&
         dpl::all_finite(vn_b2) && std::isfinite(a) && std::isfinite(b);
}

double GradientBuffer::max_abs() const {
  double m = std::max(std::abs(a), std::abs(b));
  auto scan = [&m](std::span<const double> v) {
    for (double x : v) m = std::max(m, std::abs(x));
  };
  scan(proj_weight.values);
  scan(proj_bias);
  scan(prototypes.values);
  scan(vn_w1.values);
  scan(vn_b1);
  scan(vn_w2.values);
  scan(vn_b2);
  return m;
}

double ce_loss(const ModelState& model, std::span<const double> z,
               std::uint32_t label) {
  if (label >= model.dims.num_classes)
    throw IndexError("ce_loss: label " + std::to_string(label) +
                     " out of range");
  const Vector logits = distance_logits(model, z);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return std::log(sum) + m - logits[label];
}

double total_loss(double ce, double ortho, double match, double alpha) {
  if (alpha < 0.0)
    throw ConfigError("total_loss: alpha must be >= 0");
  return ce + ortho + alpha * match;
}

namespace {

// Intermediates of one variance-net forward, kept for the backward pass.
struct VarianceForward {
  Vector pre1;    // w1 c + b1
  Vector hidden;  // relu(pre1)
  Vector q;       // w2 hidden + b2
  Vector sigma;   // sqrt(softplus(q) + floor)
};

VarianceForward variance_forward(const ModelState& model, std::uint32_t cls) {
  const auto& vn = model.variance_net;
  const auto proto = model.prototypes.c.row(cls);
  VarianceForward f;
  f.pre1.resize(vn.w1.rows);
  f.hidden.resize(vn.w1.rows);
  for (std::size_t r = 0; r < vn.w1.rows; ++r) {
    double acc = vn.b1[r];
    const auto row = vn.w1.row(r);
    for (std::size_t i = 0; i < vn.w1.cols; ++i) acc += row[i] * proto[i];
    f.pre1[r] = acc;
    f.hidden[r] = acc > 0.0 ? acc : 0.0;
  }
  f.q.resize(vn.w2.rows);
  f.sigma.resize(vn.w2.rows);
  for (std::size_t r = 0; r < vn.w2.rows; ++r) {
    double acc = vn.b2[r];
    const auto row = vn.w2.row(r);
    for (std::size_t i = 0; i < vn.w2.cols; ++i) acc += row[i] * f.hidden[i];
    f.q[r] = acc;
    f.sigma[r] = std::sqrt(softplus(acc) + vn.sigma2_floor);
  }
  return f;
}

// Routes an upstream d/d(sigma) vector through the variance net into the
// weight gradients, and returns the gradient with respect to the prototype
// that fed the net.
Vector variance_backward(const ModelState& model, std::uint32_t cls,
                         const VarianceForward& fwd, const Vector& g_sigma,
                         GradientBuffer& grads) {
  const auto& vn = model.variance_net;
  const auto proto = model.prototypes.c.row(cls);
  const std::size_t d = vn.w2.rows;
  const std::size_t h = vn.w1.rows;

  // dsigma/dv = 1/(2 sigma), dv/dq = sigmoid(q).
  Vector gq(d);
  for (std::size_t i = 0; i < d; ++i)
    gq[i] = g_sigma[i] / (2.0 * fwd.sigma[i]) * sigmoid(fwd.q[i]);

  Vector ghidden(h, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const auto row = vn.w2.row(r);
    auto grow = grads.vn_w2.row(r);
    for (std::size_t i = 0; i < h; ++i) {
      grow[i] += gq[r] * fwd.hidden[i];
      ghidden[i] += row[i] * gq[r];
    }
    grads.vn_b2[r] += gq[r];
  }

  Vector g_proto(vn.w1.cols, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double gpre = fwd.pre1[r] > 0.0 ? ghidden[r] : 0.0;
    if (gpre == 0.0) continue;
    const auto row = vn.w1.row(r);
    auto grow = grads.vn_w1.row(r);
    for (std::size_t i = 0; i < vn.w1.cols; ++i) {
      grow[i] += gpre * proto[i];
      g_proto[i] += row[i] * gpre;
    }
    grads.vn_b1[r] += gpre;
  }
  return g_proto;
}

// Accumulated matching-loss gradients for one class's sample set.
struct ClassMatchAccum {
  Vector g_sigma;  // sum over batch of d(term)/d(sigma_k)
  Vector g_mean;   // sum over batch of d(term)/d(c_k) along the mean path
  bool touched = false;
};

}  // namespace

ComponentGradients backward_components(const ModelState& model,
                                       std::span<const TrainingExample> batch,
                                       const SampleSetMap& samplesets,
                                       const ObjectiveConfig& config) {
  if (batch.empty())
    throw ConfigError("backward: empty batch");
  if (!(config.radius > 0.0))
    throw ConfigError("backward: radius must be positive");
  validate_shapes(model);

  const std::size_t num_classes = model.dims.num_classes;
  const double a = model.scales.a;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  ComponentGradients out;
  out.ce_grads = GradientBuffer::zeros_like(model);
  out.ortho_grads = GradientBuffer::zeros_like(model);
  out.match_grads = GradientBuffer::zeros_like(model);

  std::map<std::uint32_t, ClassMatchAccum> match_accum;

  for (const auto& example : batch) {
    if (example.label >= num_classes)
      throw IndexError("backward: label out of range");
    const Vector& feature = *example.feature;
    const Vector z = project(model, feature);
    const Vector dist = prototype_distances(model, z);
    Vector logits(num_classes);
    for (std::size_t i = 0; i < num_classes; ++i)
      logits[i] = -a * dist[i] + model.scales.b;
    const Vector p = softmax(logits);

    // --- cross entropy ---------------------------------------------
    {
      const double m = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double l : logits) sum += std::exp(l - m);
      out.ce += std::log(sum) + m - logits[example.label];
    }
    Vector gz(model.dims.d, 0.0);
    for (std::size_t i = 0; i < num_classes; ++i) {
      const double glogit = p[i] - (i == example.label ? 1.0 : 0.0);
      out.ce_grads.a += glogit * (-dist[i]);
      out.ce_grads.b += glogit;
      const double coeff = glogit * a / (dist[i] + kDistEps);
      const auto proto = model.prototypes.c.row(i);
      auto gproto = out.ce_grads.prototypes.row(i);
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double diff = z[k] - proto[k];
        gz[k] += -coeff * diff;
        gproto[k] += coeff * diff;
      }
    }
    for (std::size_t r = 0; r < model.dims.d; ++r) {
      auto grow = out.ce_grads.proj_weight.row(r);
      for (std::size_t cidx = 0; cidx < model.dims.d_in; ++cidx)
        grow[cidx] += gz[r] * feature[cidx];
      out.ce_grads.proj_bias[r] += gz[r];
    }

    // --- matching hinge ---------------------------------------------
    const auto it = samplesets.find(example.label);
    if (it == samplesets.end())
      throw ConfigError("backward: no sample set for class " +
                        std::to_string(example.label));
    const auto& samples = it->second.samples;
    if (samples.rows == 0)
      throw ConfigError("backward: empty sample set");
    std::size_t best_j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples.rows; ++j) {
      const double dj = euclidean_distance(z, samples.row(j));
      if (dj < best) {  // strict: ties keep the lowest index
        best = dj;
        best_j = j;
      }
    }
    const double hinge = best - config.radius;
    if (hinge > 0.0) {
      out.match += hinge * hinge;
      const double coeff = 2.0 * hinge / (best + kDistEps);
      const auto s = samples.row(best_j);
      const auto eps = it->second.epsilons.row(best_j);
      auto& accum = match_accum[example.label];
      if (!accum.touched) {
        accum.g_sigma = Vector(model.dims.d, 0.0);
        accum.g_mean = Vector(model.dims.d, 0.0);
        accum.touched = true;
      }
      Vector gz_match(model.dims.d);
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double diff = z[k] - s[k];
        gz_match[k] = coeff * diff;
        accum.g_mean[k] += -coeff * diff;
        accum.g_sigma[k] += -coeff * diff * eps[k];
      }
      for (std::size_t r = 0; r < model.dims.d; ++r) {
        auto grow = out.match_grads.proj_weight.row(r);
        for (std::size_t cidx = 0; cidx < model.dims.d_in; ++cidx)
          grow[cidx] += gz_match[r] * feature[cidx];
        out.match_grads.proj_bias[r] += gz_match[r];
      }
    }
  }

  // Route accumulated per-class sample gradients through sigma = sqrt(v)
  // and the variance net; the mean path and the net-input path both reach
  // the prototype unless detached.
  for (auto& [cls, accum] : match_accum) {
    const VarianceForward fwd = variance_forward(model, cls);
    const Vector g_proto_via_net =
        variance_backward(model, cls, fwd, accum.g_sigma, out.match_grads);
    if (!config.detach_prototype_in_sampling) {
      auto gproto = out.match_grads.prototypes.row(cls);
      for (std::size_t k = 0; k < gproto.size(); ++k)
        gproto[k] += accum.g_mean[k] + g_proto_via_net[k];
    }
  }

  out.ce *= inv_batch;
  out.match *= inv_batch;
  out.ce_grads.scale_by(inv_batch);
  out.match_grads.scale_by(inv_batch);

  // --- orthogonal loss (parameter penalty, counted once) --------------
  out.ortho = orthogonal_loss(model.prototypes);
  {
    const auto& c = model.prototypes.c;
    const double norm = 1.0 / (static_cast<double>(c.rows) *
                               static_cast<double>(c.rows - 1));
    for (std::size_t i = 0; i < c.rows; ++i) {
      auto gi = out.ortho_grads.prototypes.row(i);
      for (std::size_t j = 0; j < c.rows; ++j) {
        if (i == j) continue;
        const double dij = dot(c.row(i), c.row(j));
        const double sign = dij > 0.0 ? 1.0 : (dij < 0.0 ? -1.0 : 0.0);
        const auto cj = c.row(j);
        // both ordered pairs (i,j) and (j,i) contribute to c_i
        for (std::size_t k = 0; k < gi.size(); ++k)
          gi[k] += 2.0 * norm * sign * cj[k];
      }
    }
  }

  return out;
}

BackwardResult backward(const ModelState& model,
                        std::span<const TrainingExample> batch,
                        const SampleSetMap& samplesets,
                        const ObjectiveConfig& config) {
  ComponentGradients parts =
      backward_components(model, batch, samplesets, config);
  BackwardResult result;
  result.losses.ce = parts.ce;
  result.losses.ortho = parts.ortho;
  result.losses.match = parts.match;
  result.losses.total =
      total_loss(parts.ce, parts.ortho, parts.match, config.alpha);
  result.grads = std::move(parts.ce_grads);
  result.grads.accumulate(parts.ortho_grads, 1.0);
  result.grads.accumulate(parts.match_grads, config.alpha);
  return result;
}

}  // namespace dpl
