#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "lq/autodiff.hpp"
#include "lq/model.hpp"
#include "lq/synth.hpp"
#include "lq/train.hpp"

namespace lq::testing {

struct GradCheckResult {
  double max_entry_error = 0.0;   // |fd - an| / max(|fd|, |an|, floor)
  double max_tensor_error = 0.0;  // |fd - an|_2 / max(|fd|_2, |an|_2, floor)
  size_t checked = 0;
  std::string worst;
  std::string worst_tensor;
};

// Central differences over every scalar of every model parameter against the
// analytic gradient of `loss`. `floor` is an absolute gradient scale below
// which differences are measured absolutely (truncation noise is ~1e-10).
inline GradCheckResult check_model_gradients(Model& model,
                                             const std::function<ad::Var(ad::Graph&)>& loss,
                                             double h = 1e-5, double floor = 1e-5) {
  for (auto& p : model.params()) p.grad.resize(0, 0);
  {
    ad::Graph g;
    g.backward(loss(g));
  }
  auto eval = [&]() {
    ad::Graph g(false);
    return g.scalar(loss(g));
  };
  GradCheckResult r;
  for (auto& p : model.params()) {
    ad::Mat fd(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + h;
      const double up = eval();
      p.value.data()[i] = orig - h;
      const double dn = eval();
      p.value.data()[i] = orig;
      fd.data()[i] = (up - dn) / (2.0 * h);
    }
    const ad::Mat an = p.grad.size() ? p.grad : ad::Mat::Zero(fd.rows(), fd.cols());
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double a = an.data()[i], f = fd.data()[i];
      const double e = std::abs(f - a) / std::max({std::abs(f), std::abs(a), floor});
      if (e > r.max_entry_error) {
        r.max_entry_error = e;
        r.worst = p.name + "[" + std::to_string(i) + "] fd " + std::to_string(f) + " an " +
                  std::to_string(a);
      }
      ++r.checked;
    }
    const double te = (fd - an).norm() / std::max({fd.norm(), an.norm(), floor});
    if (te > r.max_tensor_error) {
      r.max_tensor_error = te;
      r.worst_tensor = p.name + " |an| " + std::to_string(an.norm());
    }
  }
  return r;
}

inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.width = 16;
  c.heads = 4;
  c.enc_self_layers = 2;
  c.dec_cross_layers = 2;
  c.frequencies = 2;
  c.n_desire = 12;
  c.n_uniform_anchors = 4;
  c.n_salient_anchors = 4;
  return c;
}

inline ModelConfig desk_model_config() {
  ModelConfig c;
  c.n_desire = 2048;
  c.n_uniform_anchors = 128;
  c.n_salient_anchors = 128;
  return c;
}

// Twelve-triangle box with mixed labels and a non-trivial field.
inline TrainingExample tiny_example(const ModelConfig& mc, const TrainConfig& tc) {
  SynthSample s = synthesize(ShapeKind::kCube, {Vec3(1, 0.8, 0.6), 1});
  for (int e = 0; e < s.mesh.num_edges(); e += 3) s.labels[e] = !s.labels[e];
  for (int f = 0; f < s.mesh.num_faces(); ++f) s.field.theta[f] = 0.1 * f;
  return make_example(s.mesh, s.labels, s.field, mc, tc, 5, "tiny");
}

}  // namespace lq::testing
