#include "ilvm/distributions.hpp"

#include <cmath>

namespace ilvm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

CondKind cond_kind_from_string(const std::string& s) {
  if (s == "gaussian") return CondKind::gaussian;
  if (s == "laplace") return CondKind::laplace;
  throw SpecError("unknown conditional kind '" + s + "'");
}

const char* cond_kind_name(CondKind k) {
  return k == CondKind::gaussian ? "gaussian" : "laplace";
}

ParamSet conditional_init(const Conditional& c) {
  if (c.scale < 0) throw ContractError("conditional scale must be nonnegative");
  ParamSet ps = mlp_init(c.mean_net);
  if (c.learn_scale) {
    if (c.scale <= 0) throw ContractError("learned scale requires a positive initial value");
    ps.add("log_scale", TensorValue::scalar(std::log(c.scale)));
  }
  return ps;
}

BoundConditional bind_conditional(Graph& g, const Conditional& c, const ParamSet& ps,
                                  bool frozen) {
  return BoundConditional{&c, bind(g, ps, frozen)};
}

Tensor cond_mean(Graph& g, const BoundConditional& bc, Tensor cond_input) {
  return mlp_forward(g, bc.cond->mean_net, bc.params, cond_input);
}

namespace {

// Scale as a graph tensor when learned, or the fixed double otherwise.
struct ScaleInfo {
  bool learned;
  double fixed;
  Tensor log_scale;  // valid when learned
};

ScaleInfo scale_info(const BoundConditional& bc) {
  if (bc.cond->learn_scale) {
    return ScaleInfo{true, 0.0, bc.params.by_name("log_scale")};
  }
  return ScaleInfo{false, bc.cond->scale, {}};
}

}  // namespace

Tensor rsample(Graph& g, const BoundConditional& bc, Tensor cond_input, Tensor noise) {
  Tensor m = cond_mean(g, bc, cond_input);
  if (noise.val().shape != m.val().shape) {
    throw ShapeError("rsample: noise " + shape_str(noise.val().shape) +
                     " does not match mean " + shape_str(m.val().shape));
  }
  ScaleInfo s = scale_info(bc);
  if (s.learned) {
    return add(m, mul(noise, exp(s.log_scale)));
  }
  if (s.fixed == 0.0) return m;  // degenerate limit: delta at the mean
  return add(m, mul_scalar(noise, s.fixed));
}

Tensor log_prob(Graph& g, const BoundConditional& bc, Tensor cond_input, Tensor value) {
  Tensor m = cond_mean(g, bc, cond_input);
  if (value.val().shape != m.val().shape) {
    throw ShapeError("log_prob: value " + shape_str(value.val().shape) +
                     " does not match mean " + shape_str(m.val().shape));
  }
  const auto dim = static_cast<double>(bc.cond->dim);
  ScaleInfo s = scale_info(bc);
  Tensor diff = sub(value, m);
  if (bc.cond->kind == CondKind::gaussian) {
    Tensor sq = row_sum(square(diff));  // [B]
    if (s.learned) {
      // -||v-m||^2 / (2 s^2) - (dim/2)(log 2pi + 2 log s)
      Tensor inv2s2 = mul_scalar(exp(mul_scalar(s.log_scale, -2.0)), -0.5);
      Tensor quad = mul(sq, inv2s2);
      Tensor c = add_scalar(mul_scalar(s.log_scale, -dim), -0.5 * dim * kLog2Pi);
      return add(quad, c);
    }
    if (s.fixed <= 0) throw DomainError("log_prob: scale must be positive");
    const double c = -0.5 * dim * (kLog2Pi + 2.0 * std::log(s.fixed));
    return add_scalar(mul_scalar(sq, -1.0 / (2.0 * s.fixed * s.fixed)), c);
  }
  // Laplace: -||v-m||_1 / s - dim * log(2 s)
  Tensor l1 = row_sum(abs(diff));
  if (s.learned) {
    Tensor inv_s = neg(exp(neg(s.log_scale)));
    Tensor quad = mul(l1, inv_s);
    Tensor c = add_scalar(mul_scalar(s.log_scale, -dim), -dim * std::log(2.0));
    return add(quad, c);
  }
  if (s.fixed <= 0) throw DomainError("log_prob: scale must be positive");
  const double c = -dim * std::log(2.0 * s.fixed);
  return add_scalar(mul_scalar(l1, -1.0 / s.fixed), c);
}

TensorValue draw_base_noise(CondKind kind, Shape shape, RngStream& rng) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<double> d =
      kind == CondKind::gaussian ? rng.normal_vector(n) : rng.laplace_vector(n);
  return TensorValue(std::move(shape), std::move(d));
}

SampleBank make_bank(TensorValue samples, std::uint64_t seed) {
  if (samples.rank() != 2 || samples.rows() < 1) {
    throw ContractError("sample bank requires a nonempty [count, dim] matrix");
  }
  return SampleBank{std::move(samples), seed};
}

TensorValue draw_minibatch(const SampleBank& bank, std::int64_t size, RngStream& rng) {
  if (bank.count() < 1) throw ContractError("draw_minibatch: empty bank");
  if (size < 1) throw ContractError("draw_minibatch: size must be positive");
  const auto d = bank.dim();
  TensorValue out = TensorValue::zeros({size, d});
  for (std::int64_t i = 0; i < size; ++i) {
    const auto row = static_cast<std::int64_t>(rng.next_index(static_cast<std::uint64_t>(bank.count())));
    for (std::int64_t j = 0; j < d; ++j) out.at(i, j) = bank.samples.at(row, j);
  }
  return out;
}

TensorValue draw_minibatch(const SampleBank& bank, std::int64_t size, std::uint64_t& counter) {
  RngStream rng(bank.seed, stream_id::bank, counter);
  TensorValue out = draw_minibatch(bank, size, rng);
  counter = rng.counter;
  return out;
}

SampleBank banana_sample(std::int64_t n, double correlation, std::uint64_t seed) {
  if (std::abs(correlation) >= 1.0) {
    throw ContractError("banana_sample: |correlation| must be < 1");
  }
  if (n < 1) throw ContractError("banana_sample: n must be positive");
  RngStream rng(seed, stream_id::bank);
  const double chol = std::sqrt(1.0 - correlation * correlation);
  TensorValue out = TensorValue::zeros({n, 2});
  for (std::int64_t i = 0; i < n; ++i) {
    const double n1 = rng.next_normal();
    const double n2 = rng.next_normal();
    const double g1 = n1;
    const double g2 = correlation * n1 + chol * n2;
    out.at(i, 0) = g1;
    out.at(i, 1) = g2 - g1 * g1 - 1.0;
  }
  return make_bank(std::move(out), seed);
}

Tensor banana_log_density(Graph& g, Tensor z, double correlation) {
  (void)g;
  if (std::abs(correlation) >= 1.0) {
    throw ContractError("banana_log_density: |correlation| must be < 1");
  }
  const TensorValue& zv = z.val();
  if (zv.rank() != 2 || zv.cols() != 2) {
    throw ShapeError("banana_log_density: expected [B,2], got " + shape_str(zv.shape));
  }
  const double rho = correlation;
  const double det = 1.0 - rho * rho;
  Tensor z1 = slice_cols(z, 0, 1);
  Tensor z2 = slice_cols(z, 1, 2);
  // invert the shear: g1 = z1, g2 = z2 + z1^2 + 1 (unit Jacobian)
  Tensor g1 = z1;
  Tensor g2 = add_scalar(add(z2, square(z1)), 1.0);
  Tensor quad = sub(add(square(g1), square(g2)), mul_scalar(mul(g1, g2), 2.0 * rho));
  Tensor lp = add_scalar(mul_scalar(quad, -0.5 / det), -kLog2Pi - 0.5 * std::log(det));
  return reshape(lp, {zv.rows()});
}

TensorValue banana_log_density_value(const TensorValue& z, double correlation) {
  Graph g;
  return banana_log_density(g, g.constant(z), correlation).val();
}

Tensor standard_normal_log_density(Graph& g, Tensor z) {
  (void)g;
  const TensorValue& zv = z.val();
  if (zv.rank() != 2) {
    throw ShapeError("standard_normal_log_density: expected matrix, got " + shape_str(zv.shape));
  }
  const double c = -0.5 * static_cast<double>(zv.cols()) * kLog2Pi;
  return add_scalar(mul_scalar(row_sum(square(z)), -0.5), c);
}

GammaDelta degenerate_limit_constants(CondKind kind, double scale, std::int64_t dim) {
  if (scale <= 0) throw DomainError("degenerate_limit_constants: scale must be positive");
  const auto d = static_cast<double>(dim);
  if (kind == CondKind::gaussian) {
    const double gamma = 1.0 / (2.0 * scale * scale);
    return GammaDelta{gamma, 0.5 * d * std::log(M_PI / gamma)};
  }
  return GammaDelta{1.0 / scale, d * std::log(2.0 * scale)};
}

}  // namespace ilvm
