#pragma once

#include <cstdint>
#include <string>

#include "ilvm/models.hpp"
#include "ilvm/rng.hpp"
#include "ilvm/tensor.hpp"

namespace ilvm {

enum class CondKind { gaussian, laplace };

CondKind cond_kind_from_string(const std::string& s);
const char* cond_kind_name(CondKind k);

// Prescribed conditional distribution: a mean network plus a scalar scale.
// Gaussian: N(mean(cond), scale^2 I). Laplace: Laplace(mean(cond), scale).
// scale == 0 is the degenerate (delta) limit: rsample returns the mean and
// log_prob is undefined.
struct Conditional {
  CondKind kind = CondKind::gaussian;
  MlpSpec mean_net;
  double scale = 1.0;
  bool learn_scale = false;
  std::int64_t dim = 1;
};

// Parameters of the conditional: the mean net's, plus "log_scale" when the
// scale is learned.
ParamSet conditional_init(const Conditional& c);

struct BoundConditional {
  const Conditional* cond = nullptr;
  BoundParams params;
};

BoundConditional bind_conditional(Graph& g, const Conditional& c, const ParamSet& ps,
                                  bool frozen);

// Mean network output for a batch of conditioning vectors: [B, dim].
Tensor cond_mean(Graph& g, const BoundConditional& bc, Tensor cond_input);

// Reparameterized sample mean + scale * noise; noise must come from the
// standard base density (normal or Laplace) with shape [B, dim].
Tensor rsample(Graph& g, const BoundConditional& bc, Tensor cond_input, Tensor noise);

// Per-row log density of `value` under the conditional: [B].
Tensor log_prob(Graph& g, const BoundConditional& bc, Tensor cond_input, Tensor value);

// Draw base noise matching the conditional kind.
TensorValue draw_base_noise(CondKind kind, Shape shape, RngStream& rng);

// Finite set of vectors standing in for an implicit distribution.
struct SampleBank {
  TensorValue samples;  // [count, dim]
  std::uint64_t seed = 0;

  std::int64_t count() const { return samples.rank() == 2 ? samples.rows() : 0; }
  std::int64_t dim() const { return samples.rank() == 2 ? samples.cols() : 0; }
};

SampleBank make_bank(TensorValue samples, std::uint64_t seed);

// Uniform-with-replacement minibatch of `size` rows; advances the stream.
TensorValue draw_minibatch(const SampleBank& bank, std::int64_t size, RngStream& rng);

// Convenience overload using the bank's own seed on the `bank` stream.
TensorValue draw_minibatch(const SampleBank& bank, std::int64_t size, std::uint64_t& counter);

// Banana-shaped implicit prior. Samples of a correlated bivariate Gaussian
// (unit variances) pushed through the unit-Jacobian shear
// H(g1, g2) = [g1, g2 - g1^2 - 1].
SampleBank banana_sample(std::int64_t n, double correlation, std::uint64_t seed);

// Exact log density of the banana distribution (the shear is invertible with
// unit Jacobian). Used only by the vae-baseline path.
Tensor banana_log_density(Graph& g, Tensor z, double correlation);
TensorValue banana_log_density_value(const TensorValue& z, double correlation);

// Standard normal log density per row, for analytic Gaussian priors.
Tensor standard_normal_log_density(Graph& g, Tensor z);

// Constants of the degenerate-scale limit: the negative expected log
// conditional tends to gamma * reconstruction + delta as the other side's
// scale goes to zero.
struct GammaDelta {
  double gamma = 0;
  double delta = 0;
};

GammaDelta degenerate_limit_constants(CondKind kind, double scale, std::int64_t dim);

}  // namespace ilvm
