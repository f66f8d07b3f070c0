#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilvm/tensor.hpp"

namespace ilvm {

enum class Activation { tanh, relu };

Activation activation_from_string(const std::string& s);
const char* activation_name(Activation a);

// Architecture of a fully connected net: in -> hidden... -> out, with the
// activation applied after every layer except the last unless final_act is
// set. linear_only collapses the net to a single affine layer.
struct MlpSpec {
  std::int64_t in_dim = 1;
  std::vector<std::int64_t> hidden;
  std::int64_t out_dim = 1;
  Activation act = Activation::tanh;
  std::uint64_t init_seed = 0;
  bool linear_only = false;
  bool final_act = false;
  bool zero_init_last = false;

  // Full width chain [in, h..., out]; a single affine layer when linear_only.
  std::vector<std::int64_t> widths() const;
  void validate() const;
};

// Named parameter tensors for one of the four parameter sets. Names are
// unique and shapes are fixed at creation.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<TensorValue> values;

  void add(std::string name, TensorValue v);
  std::int64_t index_of(const std::string& name) const;  // -1 if absent
  bool has(const std::string& name) const { return index_of(name) >= 0; }
  const TensorValue& by_name(const std::string& name) const;
  TensorValue& by_name(const std::string& name);
  std::size_t size() const { return values.size(); }
  std::int64_t total_coords() const;
};

// A ParamSet registered on a graph, either as tracked leaves or as frozen
// constants. Keeps the node handles aligned with the set's order.
struct BoundParams {
  const ParamSet* source = nullptr;
  std::vector<Tensor> tensors;
  bool frozen = false;

  Tensor by_name(const std::string& name) const;
};

BoundParams bind(Graph& g, const ParamSet& ps, bool frozen);

// Gradients for a bound set, aligned with the ParamSet order. Zero tensors
// for parameters the root does not reach (and always for frozen bindings).
std::vector<TensorValue> extract_grads(const BoundParams& bp, const GradientMap& gm);

// Glorot-uniform initialized parameters ("w0", "b0", "w1", ...).
ParamSet mlp_init(const MlpSpec& spec);

Tensor mlp_forward(Graph& g, const MlpSpec& spec, const BoundParams& params, Tensor input);

// Amortized log density ratio estimator: an MLP over concat(primary,
// conditioning) with a zero-initialized output layer, so log r starts at 0
// (r = 1, D = 1/2). The conditioning input can be structurally ignored.
struct RatioNetSpec {
  MlpSpec net;
  bool ignore_conditioning = false;

  static RatioNetSpec make(std::int64_t primary_dim, std::int64_t cond_dim,
                           std::vector<std::int64_t> hidden, Activation act,
                           std::uint64_t init_seed, bool ignore_conditioning);
};

// Per-row log r(primary; conditioning): [B].
Tensor ratio_log(Graph& g, const RatioNetSpec& spec, const BoundParams& params, Tensor primary,
                 Tensor conditioning);

// D := 1 - sigmoid(log r), elementwise on values.
TensorValue discriminator_from_ratio(const TensorValue& log_r);

// Stable log D = -softplus(log r) and log(1 - D) = log sigmoid(log r).
Tensor log_discriminator(Graph& g, Tensor log_r);
Tensor log1m_discriminator(Graph& g, Tensor log_r);

}  // namespace ilvm
