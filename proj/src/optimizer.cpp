#include "ilvm/optimizer.hpp"

#include <cmath>

namespace ilvm {

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw SpecError("unknown optimizer '" + s + "'");
}

const char* opt_kind_name(OptKind k) { return k == OptKind::sgd ? "sgd" : "adam"; }

Moments moments_like(const ParamSet& ps) {
  Moments mo;
  mo.m.reserve(ps.values.size());
  mo.v.reserve(ps.values.size());
  for (const auto& p : ps.values) {
    mo.m.push_back(TensorValue::zeros(p.shape));
    mo.v.push_back(TensorValue::zeros(p.shape));
  }
  return mo;
}

void optimizer_step(OptKind kind, ParamSet& params, const std::vector<TensorValue>& grads,
                    Moments& moments, double lr, const AdamHyper& hyper) {
  if (grads.size() != params.values.size()) {
    throw ShapeError("optimizer_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.values.size()) + " parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape != params.values[i].shape) {
      throw ShapeError("optimizer_step: gradient " + shape_str(grads[i].shape) +
                       " does not match parameter " + shape_str(params.values[i].shape));
    }
  }
  moments.t += 1;
  if (kind == OptKind::sgd) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto& p = params.values[i].data;
      const auto& g = grads[i].data;
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(moments.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(moments.t));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.values[i].data;
    auto& m = moments.m[i].data;
    auto& v = moments.v[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

}  // namespace ilvm
