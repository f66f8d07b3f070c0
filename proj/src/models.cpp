#include "ilvm/models.hpp"

#include <cmath>

#include "ilvm/rng.hpp"

namespace ilvm {

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw SpecError("unknown activation '" + s + "'");
}

const char* activation_name(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

std::vector<std::int64_t> MlpSpec::widths() const {
  if (linear_only) return {in_dim, out_dim};
  std::vector<std::int64_t> w;
  w.push_back(in_dim);
  for (auto h : hidden) w.push_back(h);
  w.push_back(out_dim);
  return w;
}

void MlpSpec::validate() const {
  auto w = widths();
  if (w.size() < 2) throw ContractError("mlp: at least one layer required");
  for (auto d : w) {
    if (d < 1) throw ContractError("mlp: widths must be positive");
  }
}

void ParamSet::add(std::string name, TensorValue v) {
  if (has(name)) throw ContractError("duplicate parameter name '" + name + "'");
  names.push_back(std::move(name));
  values.push_back(std::move(v));
}

std::int64_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<std::int64_t>(i);
  }
  return -1;
}

const TensorValue& ParamSet::by_name(const std::string& name) const {
  auto i = index_of(name);
  if (i < 0) throw ContractError("no parameter named '" + name + "'");
  return values[static_cast<std::size_t>(i)];
}

TensorValue& ParamSet::by_name(const std::string& name) {
  auto i = index_of(name);
  if (i < 0) throw ContractError("no parameter named '" + name + "'");
  return values[static_cast<std::size_t>(i)];
}

std::int64_t ParamSet::total_coords() const {
  std::int64_t n = 0;
  for (const auto& v : values) n += v.numel();
  return n;
}

BoundParams bind(Graph& g, const ParamSet& ps, bool frozen) {
  BoundParams bp;
  bp.source = &ps;
  bp.frozen = frozen;
  bp.tensors.reserve(ps.values.size());
  for (const auto& v : ps.values) {
    bp.tensors.push_back(frozen ? g.constant(v) : g.leaf(v));
  }
  return bp;
}

Tensor BoundParams::by_name(const std::string& name) const {
  auto i = source->index_of(name);
  if (i < 0) throw ContractError("no parameter named '" + name + "'");
  return tensors[static_cast<std::size_t>(i)];
}

std::vector<TensorValue> extract_grads(const BoundParams& bp, const GradientMap& gm) {
  std::vector<TensorValue> out;
  out.reserve(bp.tensors.size());
  for (std::size_t i = 0; i < bp.tensors.size(); ++i) {
    auto it = bp.frozen ? gm.end() : gm.find(bp.tensors[i].id);
    if (it == gm.end()) {
      out.push_back(TensorValue::zeros(bp.source->values[i].shape));
    } else {
      out.push_back(it->second);
    }
  }
  return out;
}

ParamSet mlp_init(const MlpSpec& spec) {
  spec.validate();
  const auto w = spec.widths();
  RngStream rng(spec.init_seed, stream_id::init);
  ParamSet ps;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::int64_t fan_in = w[l];
    const std::int64_t fan_out = w[l + 1];
    const bool zero = spec.zero_init_last && l + 2 == w.size();
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    TensorValue weight = TensorValue::zeros({fan_in, fan_out});
    if (!zero) {
      for (auto& v : weight.data) v = (2.0 * rng.next_uniform() - 1.0) * a;
    }
    ps.add("w" + std::to_string(l), std::move(weight));
    ps.add("b" + std::to_string(l), TensorValue::zeros({fan_out}));
  }
  return ps;
}

Tensor mlp_forward(Graph& g, const MlpSpec& spec, const BoundParams& params, Tensor input) {
  (void)g;
  const auto w = spec.widths();
  if (input.val().rank() != 2 || input.val().cols() != w.front()) {
    throw ShapeError("mlp_forward: input " + shape_str(input.val().shape) +
                     " does not match in_dim " + std::to_string(w.front()));
  }
  Tensor h = input;
  const std::size_t layers = w.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add(matmul(h, params.by_name("w" + std::to_string(l))),
            params.by_name("b" + std::to_string(l)));
    const bool last = (l + 1 == layers);
    const bool activate = spec.linear_only ? false : (!last || spec.final_act);
    if (activate) {
      h = spec.act == Activation::tanh ? tanh(h) : relu(h);
    }
  }
  return h;
}

RatioNetSpec RatioNetSpec::make(std::int64_t primary_dim, std::int64_t cond_dim,
                                std::vector<std::int64_t> hidden, Activation act,
                                std::uint64_t init_seed, bool ignore_conditioning) {
  RatioNetSpec r;
  r.ignore_conditioning = ignore_conditioning;
  r.net.in_dim = ignore_conditioning ? primary_dim : primary_dim + cond_dim;
  r.net.hidden = std::move(hidden);
  r.net.out_dim = 1;
  r.net.act = act;
  r.net.init_seed = init_seed;
  r.net.zero_init_last = true;
  return r;
}

Tensor ratio_log(Graph& g, const RatioNetSpec& spec, const BoundParams& params, Tensor primary,
                 Tensor conditioning) {
  Tensor in = primary;
  if (!spec.ignore_conditioning) {
    if (primary.val().rows() != conditioning.val().rows()) {
      throw ShapeError("ratio_log: batch sizes " + shape_str(primary.val().shape) + " vs " +
                       shape_str(conditioning.val().shape));
    }
    in = concat_cols(primary, conditioning);
  }
  Tensor out = mlp_forward(g, spec.net, params, in);  // [B, 1]
  return reshape(out, {out.val().rows()});
}

TensorValue discriminator_from_ratio(const TensorValue& log_r) {
  TensorValue out = log_r;
  for (auto& v : out.data) {
    // 1 - sigmoid(s) = sigmoid(-s)
    const double s = -v;
    if (s >= 0) {
      v = 1.0 / (1.0 + std::exp(-s));
    } else {
      const double e = std::exp(s);
      v = e / (1.0 + e);
    }
  }
  return out;
}

Tensor log_discriminator(Graph& g, Tensor log_r) {
  (void)g;
  return log1m_sigmoid(log_r);
}

Tensor log1m_discriminator(Graph& g, Tensor log_r) {
  (void)g;
  return log_sigmoid(log_r);
}

}  // namespace ilvm
