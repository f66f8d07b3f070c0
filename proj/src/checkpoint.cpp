#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ilvm/trainer.hpp"

namespace ilvm {

namespace {

using nlohmann::json;

std::string encode_f64(const std::vector<double>& v) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 16);
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int n = 15; n >= 0; --n) out.push_back(hex[(bits >> (4 * n)) & 0xF]);
  }
  return out;
}

std::vector<double> decode_f64(const std::string& s) {
  if (s.size() % 16 != 0) throw IoError("corrupt checkpoint: bad array encoding");
  std::vector<double> out(s.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (std::size_t n = 0; n < 16; ++n) {
      const char c = s[i * 16 + n];
      std::uint64_t nib;
      if (c >= '0' && c <= '9') {
        nib = static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        nib = static_cast<std::uint64_t>(c - 'a' + 10);
      } else {
        throw IoError("corrupt checkpoint: bad hex digit");
      }
      bits = (bits << 4) | nib;
    }
    double d;
    std::memcpy(&d, &bits, 8);
    out[i] = d;
  }
  return out;
}

json param_set_to_json(const ParamSet& ps) {
  json arr = json::array();
  for (std::size_t i = 0; i < ps.values.size(); ++i) {
    json e;
    e["name"] = ps.names[i];
    e["shape"] = ps.values[i].shape;
    e["data"] = encode_f64(ps.values[i].data);
    arr.push_back(e);
  }
  return arr;
}

ParamSet param_set_from_json(const json& arr) {
  ParamSet ps;
  for (const auto& e : arr) {
    Shape shape = e.at("shape").get<Shape>();
    std::vector<double> data = decode_f64(e.at("data").get<std::string>());
    ps.add(e.at("name").get<std::string>(), TensorValue(std::move(shape), std::move(data)));
  }
  return ps;
}

json moments_to_json(const Moments& mo) {
  json out;
  out["t"] = mo.t;
  json m = json::array();
  json v = json::array();
  for (const auto& e : mo.m) m.push_back(encode_f64(e.data));
  for (const auto& e : mo.v) v.push_back(encode_f64(e.data));
  out["m"] = m;
  out["v"] = v;
  return out;
}

Moments moments_from_json(const json& j, const ParamSet& ps) {
  Moments mo;
  mo.t = j.at("t").get<std::int64_t>();
  const auto& m = j.at("m");
  const auto& v = j.at("v");
  if (m.size() != ps.values.size() || v.size() != ps.values.size()) {
    throw IoError("corrupt checkpoint: moment count mismatch");
  }
  for (std::size_t i = 0; i < ps.values.size(); ++i) {
    mo.m.push_back(TensorValue(ps.values[i].shape, decode_f64(m[i].get<std::string>())));
    mo.v.push_back(TensorValue(ps.values[i].shape, decode_f64(v[i].get<std::string>())));
  }
  return mo;
}

json mlp_param_shapes(const MlpSpec& spec, bool learn_scale) {
  json shapes;
  const auto w = spec.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    shapes["w" + std::to_string(l)] = Shape{w[l], w[l + 1]};
    shapes["b" + std::to_string(l)] = Shape{w[l + 1]};
  }
  if (learn_scale) shapes["log_scale"] = Shape{};
  return shapes;
}

// Structural fingerprint derived from the configuration, never from the
// loaded arrays, so a checkpoint from a different configuration is rejected.
json fingerprint(const TrainConfig& cfg, const Models& models) {
  json fp;
  fp["mode"] = mode_name(cfg.mode);
  fp["cond_kind"] = cond_kind_name(cfg.cond_kind);
  fp["data_dim"] = models.data_dim;
  fp["latent_dim"] = models.latent_dim;
  json sets;
  sets["theta"] = mlp_param_shapes(models.likelihood.mean_net, models.likelihood.learn_scale);
  sets["phi"] = mlp_param_shapes(models.posterior.mean_net, models.posterior.learn_scale);
  sets["alpha"] = mlp_param_shapes(models.ratio_latent.net, false);
  sets["beta"] = mlp_param_shapes(models.ratio_observed.net, false);
  fp["param_shapes"] = sets;
  return fp;
}

}  // namespace

void checkpoint_save(const TrainState& state, const TrainConfig& cfg, const Models& models,
                     const std::string& path) {
  json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["fingerprint"] = fingerprint(cfg, models);
  doc["step"] = state.step;
  doc["cursors"] = {{"data", state.cursors.data},
                    {"prior", state.cursors.prior},
                    {"eps", state.cursors.eps},
                    {"xi", state.cursors.xi}};
  doc["params"] = {{"theta", param_set_to_json(state.theta)},
                   {"phi", param_set_to_json(state.phi)},
                   {"alpha", param_set_to_json(state.alpha)},
                   {"beta", param_set_to_json(state.beta)}};
  doc["moments"] = {{"theta", moments_to_json(state.m_theta)},
                    {"phi", moments_to_json(state.m_phi)},
                    {"alpha", moments_to_json(state.m_alpha)},
                    {"beta", moments_to_json(state.m_beta)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

TrainState checkpoint_load(const std::string& path, const TrainConfig& cfg,
                           const Models& models) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint '" + path + "': " + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw IoError("checkpoint '" + path + "' has format version " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));
    }
    TrainState state;
    const auto& params = doc.at("params");
    state.theta = param_set_from_json(params.at("theta"));
    state.phi = param_set_from_json(params.at("phi"));
    state.alpha = param_set_from_json(params.at("alpha"));
    state.beta = param_set_from_json(params.at("beta"));
    const auto& moments = doc.at("moments");
    state.m_theta = moments_from_json(moments.at("theta"), state.theta);
    state.m_phi = moments_from_json(moments.at("phi"), state.phi);
    state.m_alpha = moments_from_json(moments.at("alpha"), state.alpha);
    state.m_beta = moments_from_json(moments.at("beta"), state.beta);
    state.step = doc.at("step").get<std::int64_t>();
    const auto& cursors = doc.at("cursors");
    state.cursors.data = cursors.at("data").get<std::uint64_t>();
    state.cursors.prior = cursors.at("prior").get<std::uint64_t>();
    state.cursors.eps = cursors.at("eps").get<std::uint64_t>();
    state.cursors.xi = cursors.at("xi").get<std::uint64_t>();

    if (doc.at("fingerprint") != fingerprint(cfg, models)) {
      throw IoError("checkpoint '" + path + "' does not match the experiment configuration");
    }
    return state;
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace ilvm
