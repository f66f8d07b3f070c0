#include "ilvm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ilvm/idx.hpp"
#include "ilvm/io.hpp"

namespace ilvm {

namespace fs = std::filesystem;

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "banana") return ExperimentKind::banana;
  if (s == "linear-ppca") return ExperimentKind::linear_ppca;
  if (s == "gaussian-sanity") return ExperimentKind::gaussian_sanity;
  throw SpecError("unknown experiment '" + s + "'");
}

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::banana: return "banana";
    case ExperimentKind::linear_ppca: return "linear-ppca";
    case ExperimentKind::gaussian_sanity: return "gaussian-sanity";
  }
  return "?";
}

namespace {

DataSource data_source_from_string(const std::string& s) {
  if (s == "synthetic-banana-mlp") return DataSource::synthetic_banana_mlp;
  if (s == "synthetic-linear-gaussian") return DataSource::synthetic_linear_gaussian;
  if (s == "synthetic-gaussian") return DataSource::synthetic_gaussian;
  if (s == "csv") return DataSource::csv;
  if (s == "idx") return DataSource::idx;
  throw SpecError("unknown data_source '" + s + "'");
}

PriorSource prior_source_from_string(const std::string& s) {
  if (s == "banana") return PriorSource::banana;
  if (s == "gaussian") return PriorSource::gaussian;
  if (s == "csv") return PriorSource::csv;
  throw SpecError("unknown prior_source '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (!end || *end != '\0') throw SpecError("key '" + key + "': bad number '" + v + "'");
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  const double d = parse_number(key, v);
  auto i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d) throw SpecError("key '" + key + "': expected integer, got '" + v + "'");
  return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const auto i = parse_int(key, v);
  if (i < 0) throw SpecError("key '" + key + "': expected nonnegative integer");
  return static_cast<std::uint64_t>(i);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw SpecError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<std::int64_t> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(parse_int(key, trim(cell)));
  }
  return out;
}

void apply_kind_defaults(ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::banana:
      break;  // struct defaults are the banana defaults
    case ExperimentKind::linear_ppca:
      spec.data_source = DataSource::synthetic_linear_gaussian;
      spec.prior_source = PriorSource::gaussian;
      spec.data_dim = 6;
      spec.latent_dim = 2;
      spec.config.linear_maps = true;
      break;
    case ExperimentKind::gaussian_sanity:
      spec.data_source = DataSource::synthetic_gaussian;
      spec.prior_source = PriorSource::gaussian;
      spec.data_dim = 1;
      spec.latent_dim = 1;
      spec.config.linear_maps = true;
      break;
  }
}

void require_readable(const std::string& key, const std::string& path) {
  if (path.empty()) throw SpecError("key '" + key + "' is required by the chosen source");
  if (!fs::exists(path)) throw SpecError("key '" + key + "': path '" + path + "' does not exist");
}

}  // namespace

ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw SpecError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw SpecError(origin + ":" + std::to_string(lineno) + ": empty key or value");
    }
    if (!kv.emplace(key, value).second) {
      throw SpecError(origin + ": duplicate key '" + key + "'");
    }
  }

  ExperimentSpec spec;
  if (auto it = kv.find("experiment"); it != kv.end()) {
    spec.kind = experiment_kind_from_string(it->second);
    kv.erase(it);
  }
  apply_kind_defaults(spec);

  TrainConfig& c = spec.config;
  for (const auto& [key, value] : kv) {
    if (key == "mode") c.mode = mode_from_string(value);
    else if (key == "dm_loss") c.dm_variant = dm_variant_from_string(value);
    else if (key == "dre_objective") c.dre_form = dre_form_from_string(value);
    else if (key == "steps") c.steps = parse_int(key, value);
    else if (key == "batch") c.batch = parse_int(key, value);
    else if (key == "lr_model") c.lr_model = parse_number(key, value);
    else if (key == "lr_ratio") c.lr_ratio = parse_number(key, value);
    else if (key == "optimizer") c.optimizer = opt_kind_from_string(value);
    else if (key == "adam_beta1") c.adam.beta1 = parse_number(key, value);
    else if (key == "adam_beta2") c.adam.beta2 = parse_number(key, value);
    else if (key == "adam_eps") c.adam.eps = parse_number(key, value);
    else if (key == "ratio_steps") c.ratio_steps = parse_int(key, value);
    else if (key == "noise_samples") c.noise_samples = parse_int(key, value);
    else if (key == "conditional") c.cond_kind = cond_kind_from_string(value);
    else if (key == "tau") c.tau = parse_number(key, value);
    else if (key == "t") c.t = parse_number(key, value);
    else if (key == "learn_scales") c.learn_scales = parse_bool(key, value);
    else if (key == "rho") c.rho = static_cast<int>(parse_int(key, value));
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "weight_elbo") c.weight_elbo = parse_number(key, value);
    else if (key == "weight_aplbo") c.weight_aplbo = parse_number(key, value);
    else if (key == "cycle_weight") c.cycle_weight = parse_number(key, value);
    else if (key == "map_hidden") c.map_hidden = parse_int_list(key, value);
    else if (key == "map_activation") c.map_act = activation_from_string(value);
    else if (key == "ratio_hidden") c.ratio_hidden = parse_int_list(key, value);
    else if (key == "ratio_activation") c.ratio_act = activation_from_string(value);
    else if (key == "linear_maps") c.linear_maps = parse_bool(key, value);
    else if (key == "log_interval") c.log_interval = parse_int(key, value);
    else if (key == "data_source") spec.data_source = data_source_from_string(value);
    else if (key == "data_csv") spec.data_csv = value;
    else if (key == "idx_images") spec.idx_images = value;
    else if (key == "idx_labels") spec.idx_labels = value;
    else if (key == "data_n") spec.data_n = parse_int(key, value);
    else if (key == "data_dim") spec.data_dim = parse_int(key, value);
    else if (key == "data_noise") spec.data_noise = parse_number(key, value);
    else if (key == "data_seed") spec.data_seed = parse_u64(key, value);
    else if (key == "train_cap") spec.train_cap = parse_int(key, value);
    else if (key == "test_cap") spec.test_cap = parse_int(key, value);
    else if (key == "prior_source") spec.prior_source = prior_source_from_string(value);
    else if (key == "prior_csv") spec.prior_csv = value;
    else if (key == "prior_count") spec.prior_count = parse_int(key, value);
    else if (key == "prior_rho") spec.prior_rho = parse_number(key, value);
    else if (key == "latent_dim") spec.latent_dim = parse_int(key, value);
    else if (key == "output_dir") spec.output_dir = value;
    else if (key == "eval_batch") spec.eval_batch = parse_int(key, value);
    else if (key == "grid_side") spec.grid_side = parse_int(key, value);
    else throw SpecError(origin + ": unknown key '" + key + "'");
  }

  try {
    spec.config.validate();
  } catch (const Error& e) {
    throw SpecError(origin + ": " + e.what());
  }
  if (spec.data_n < 2 || spec.data_dim < 1 || spec.latent_dim < 1 || spec.prior_count < 1 ||
      spec.eval_batch < 1 || spec.grid_side < 1 || spec.train_cap < 1 || spec.test_cap < 1) {
    throw SpecError(origin + ": counts and dimensions must be positive");
  }
  if (spec.data_source == DataSource::csv) require_readable("data_csv", spec.data_csv);
  if (spec.data_source == DataSource::idx) {
    require_readable("idx_images", spec.idx_images);
    require_readable("idx_labels", spec.idx_labels);
  }
  if (spec.prior_source == PriorSource::csv) require_readable("prior_csv", spec.prior_csv);
  if (spec.config.mode == Mode::vae_baseline && spec.prior_source == PriorSource::csv) {
    throw SpecError(origin + ": vae-baseline mode needs an analytic prior (banana or gaussian)");
  }
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec_text(ss.str(), path);
}

// ---- dataset -----------------------------------------------------------------

namespace {

struct RawData {
  TensorValue x;
  std::vector<int> labels;
};

RawData synthesize_banana_mlp(const ExperimentSpec& spec) {
  SampleBank latents = banana_sample(spec.data_n, spec.prior_rho,
                                     rng_word(spec.data_seed, stream_id::synthetic, 1));
  // Frozen random generator net over standardized latent coordinates.
  MlpSpec gen;
  gen.in_dim = 2;
  gen.hidden = {16};
  gen.out_dim = spec.data_dim;
  gen.act = Activation::tanh;
  gen.init_seed = rng_word(spec.data_seed, stream_id::synthetic, 2);
  ParamSet gp = mlp_init(gen);

  TensorValue z_std = latents.samples;
  for (std::int64_t i = 0; i < z_std.rows(); ++i) {
    z_std.at(i, 1) = (z_std.at(i, 1) + 2.0) / std::sqrt(3.0);  // banana mean/std of z2
  }
  Graph g;
  auto bound = bind(g, gp, true);
  TensorValue x = mlp_forward(g, gen, bound, g.constant(z_std)).val();

  RngStream noise(spec.data_seed, stream_id::synthetic, 1000);
  for (auto& v : x.data) v += spec.data_noise * noise.next_normal();

  RawData out;
  out.x = std::move(x);
  out.labels.reserve(static_cast<std::size_t>(spec.data_n));
  for (std::int64_t i = 0; i < spec.data_n; ++i) {
    const int q = (latents.samples.at(i, 0) > 0 ? 1 : 0) +
                  (latents.samples.at(i, 1) > -2.0 ? 2 : 0);
    out.labels.push_back(q);
  }
  return out;
}

RawData synthesize_linear_gaussian(const ExperimentSpec& spec) {
  const std::int64_t k = spec.latent_dim;
  const std::int64_t d = spec.data_dim;
  RngStream ws(spec.data_seed, stream_id::synthetic, 1);
  TensorValue w = TensorValue::zeros({k, d});
  for (auto& v : w.data) v = ws.next_normal();
  TensorValue b = TensorValue::zeros({d});
  for (auto& v : b.data) v = 0.5 * ws.next_normal();

  RngStream zs(spec.data_seed, stream_id::synthetic, 2);
  RngStream noise(spec.data_seed, stream_id::synthetic, 3);
  TensorValue x = TensorValue::zeros({spec.data_n, d});
  std::vector<double> z(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < spec.data_n; ++i) {
    for (auto& v : z) v = zs.next_normal();
    for (std::int64_t j = 0; j < d; ++j) {
      double acc = b.data[static_cast<std::size_t>(j)];
      for (std::int64_t l = 0; l < k; ++l) acc += z[static_cast<std::size_t>(l)] * w.at(l, j);
      x.at(i, j) = acc + spec.data_noise * noise.next_normal();
    }
  }
  return RawData{std::move(x), std::vector<int>(static_cast<std::size_t>(spec.data_n), 0)};
}

RawData synthesize_gaussian(const ExperimentSpec& spec) {
  RngStream xs(spec.data_seed, stream_id::synthetic, 4);
  TensorValue x = TensorValue::zeros({spec.data_n, spec.data_dim});
  for (auto& v : x.data) v = xs.next_normal();
  return RawData{std::move(x), std::vector<int>(static_cast<std::size_t>(spec.data_n), 0)};
}

}  // namespace

Dataset build_dataset(const ExperimentSpec& spec) {
  RawData raw;
  switch (spec.data_source) {
    case DataSource::synthetic_banana_mlp:
      raw = synthesize_banana_mlp(spec);
      break;
    case DataSource::synthetic_linear_gaussian:
      raw = synthesize_linear_gaussian(spec);
      break;
    case DataSource::synthetic_gaussian:
      raw = synthesize_gaussian(spec);
      break;
    case DataSource::csv: {
      raw.x = read_matrix_csv(spec.data_csv);
      raw.labels.assign(static_cast<std::size_t>(raw.x.rows()), 0);
      break;
    }
    case DataSource::idx: {
      IdxData idx = load_idx(spec.idx_images, spec.idx_labels);
      raw.x = std::move(idx.pixels);
      raw.labels = std::move(idx.labels);
      break;
    }
  }
  const std::int64_t n = raw.x.rows();
  if (n < 2) throw SpecError("dataset needs at least 2 rows for a train/test split");

  // Seed-stable 6:1 split via a Fisher-Yates shuffle of the row indices.
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  RngStream shuffle(spec.data_seed, stream_id::split);
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(shuffle.next_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::int64_t n_train = std::min((n * 6) / 7, spec.train_cap);
  if (n_train < 1) n_train = 1;
  const std::int64_t n_test = std::min(n - n_train, spec.test_cap);
  if (n_test < 1) throw SpecError("dataset too small for a held-out split");

  const std::int64_t d = raw.x.cols();
  auto take = [&](std::int64_t begin, std::int64_t count, SampleBank& bank,
                  std::vector<int>& labels) {
    TensorValue m = TensorValue::zeros({count, d});
    labels.clear();
    labels.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
      const auto src = idx[static_cast<std::size_t>(begin + i)];
      for (std::int64_t j = 0; j < d; ++j) m.at(i, j) = raw.x.at(src, j);
      labels.push_back(raw.labels[static_cast<std::size_t>(src)]);
    }
    bank = make_bank(std::move(m), rng_word(spec.data_seed, stream_id::bank, 1));
  };

  Dataset out;
  take(0, n_train, out.train, out.train_labels);
  take(n_train, n_test, out.test, out.test_labels);
  return out;
}

Prior build_prior(const ExperimentSpec& spec) {
  Prior out;
  switch (spec.prior_source) {
    case PriorSource::banana: {
      const double rho = spec.prior_rho;
      out.bank = banana_sample(spec.prior_count, rho, rng_word(spec.data_seed, stream_id::bank, 2));
      out.log_density = [rho](Graph& g, Tensor z) { return banana_log_density(g, z, rho); };
      break;
    }
    case PriorSource::gaussian: {
      RngStream zs(rng_word(spec.data_seed, stream_id::bank, 3), stream_id::bank);
      TensorValue z = TensorValue::zeros({spec.prior_count, spec.latent_dim});
      for (auto& v : z.data) v = zs.next_normal();
      out.bank = make_bank(std::move(z), rng_word(spec.data_seed, stream_id::bank, 4));
      out.log_density = [](Graph& g, Tensor z2) { return standard_normal_log_density(g, z2); };
      break;
    }
    case PriorSource::csv: {
      out.bank = make_bank(read_matrix_csv(spec.prior_csv),
                           rng_word(spec.data_seed, stream_id::bank, 5));
      out.log_density = nullptr;
      break;
    }
  }
  if (out.bank.dim() != spec.latent_dim) {
    throw SpecError("prior dimensionality " + std::to_string(out.bank.dim()) +
                    " does not match latent_dim " + std::to_string(spec.latent_dim));
  }
  return out;
}

namespace {

SampleBank build_prior_eval_bank(const ExperimentSpec& spec, const Prior& prior) {
  switch (spec.prior_source) {
    case PriorSource::banana:
      return banana_sample(spec.eval_batch, spec.prior_rho,
                           rng_word(spec.data_seed, stream_id::eval, 1));
    case PriorSource::gaussian: {
      RngStream zs(rng_word(spec.data_seed, stream_id::eval, 2), stream_id::eval);
      TensorValue z = TensorValue::zeros({spec.eval_batch, spec.latent_dim});
      for (auto& v : z.data) v = zs.next_normal();
      return make_bank(std::move(z), 0);
    }
    case PriorSource::csv: {
      const std::int64_t n = std::min(spec.eval_batch, prior.bank.count());
      TensorValue z = TensorValue::zeros({n, prior.bank.dim()});
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < prior.bank.dim(); ++j) z.at(i, j) = prior.bank.samples.at(i, j);
      }
      return make_bank(std::move(z), 0);
    }
  }
  throw ContractError("bad prior source");
}

TensorValue forward_means(const Models& models, const TrainState& state, const TensorValue& in,
                          bool encode_then_decode) {
  Graph g;
  auto lik = bind_conditional(g, models.likelihood, state.theta, true);
  auto post = bind_conditional(g, models.posterior, state.phi, true);
  Tensor v = g.constant(in);
  if (encode_then_decode) {
    return cond_mean(g, lik, cond_mean(g, post, v)).val();
  }
  return cond_mean(g, post, cond_mean(g, lik, v)).val();
}

}  // namespace

EvalResult evaluate(const Models& models, const TrainState& state, const SampleBank& test,
                    const SampleBank& prior_eval) {
  EvalResult r;
  r.n_test = test.count();
  r.n_prior = prior_eval.count();

  TensorValue x_rec = forward_means(models, state, test.samples, true);
  double acc = 0;
  for (std::size_t i = 0; i < x_rec.data.size(); ++i) {
    const double d = test.samples.data[i] - x_rec.data[i];
    acc += d * d;
  }
  r.mse_x = acc / static_cast<double>(test.count() * test.dim());

  TensorValue z_rec = forward_means(models, state, prior_eval.samples, false);
  acc = 0;
  for (std::size_t i = 0; i < z_rec.data.size(); ++i) {
    const double d = prior_eval.samples.data[i] - z_rec.data[i];
    acc += d * d;
  }
  r.mse_z = acc / static_cast<double>(prior_eval.count() * prior_eval.dim());
  return r;
}

TensorValue decode_grid(const Models& models, const TrainState& state, const SampleBank& prior,
                        std::int64_t side) {
  const std::int64_t k = prior.dim();
  std::vector<double> lo(static_cast<std::size_t>(k));
  std::vector<double> hi(static_cast<std::size_t>(k));
  std::vector<double> mid(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < k; ++j) {
    double mn = prior.samples.at(0, j);
    double mx = mn;
    for (std::int64_t i = 1; i < prior.count(); ++i) {
      mn = std::min(mn, prior.samples.at(i, j));
      mx = std::max(mx, prior.samples.at(i, j));
    }
    lo[static_cast<std::size_t>(j)] = mn;
    hi[static_cast<std::size_t>(j)] = mx;
    mid[static_cast<std::size_t>(j)] = 0.5 * (mn + mx);
  }
  const std::int64_t rows = side * side;
  TensorValue z = TensorValue::zeros({rows, k});
  for (std::int64_t a = 0; a < side; ++a) {
    for (std::int64_t b = 0; b < side; ++b) {
      const std::int64_t row = a * side + b;
      for (std::int64_t j = 0; j < k; ++j) z.at(row, j) = mid[static_cast<std::size_t>(j)];
      const double fa = side == 1 ? 0.5 : static_cast<double>(a) / static_cast<double>(side - 1);
      const double fb = side == 1 ? 0.5 : static_cast<double>(b) / static_cast<double>(side - 1);
      if (k == 1) {
        const double f = static_cast<double>(row) / static_cast<double>(rows - 1);
        z.at(row, 0) = lo[0] + f * (hi[0] - lo[0]);
      } else {
        z.at(row, 0) = lo[0] + fa * (hi[0] - lo[0]);
        z.at(row, 1) = lo[1] + fb * (hi[1] - lo[1]);
      }
    }
  }
  Graph g;
  auto lik = bind_conditional(g, models.likelihood, state.theta, true);
  TensorValue x = cond_mean(g, lik, g.constant(z)).val();

  TensorValue out = TensorValue::zeros({rows, k + x.cols()});
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < k; ++j) out.at(i, j) = z.at(i, j);
    for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, k + j) = x.at(i, j);
  }
  return out;
}

std::string resolve_output_dir(const ExperimentSpec& spec, const std::string& output_root) {
  fs::path dir(spec.output_dir);
  std::string root = output_root;
  if (root.empty()) {
    if (const char* env = std::getenv("ILVM_OUTPUT_ROOT")) root = env;
  }
  if (!root.empty() && dir.is_relative()) dir = fs::path(root) / dir;
  return dir.string();
}

namespace {

std::string csv_header(const std::string& stem, std::int64_t dims) {
  std::string h;
  for (std::int64_t j = 0; j < dims; ++j) {
    if (j) h += ",";
    h += stem + std::to_string(j + 1);
  }
  return h;
}

}  // namespace

ExperimentOutputs run_experiment(const ExperimentSpec& spec, const std::string& output_root) {
  const std::string dir = resolve_output_dir(spec, output_root);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SpecError("cannot create output directory '" + dir + "'");

  Dataset data = build_dataset(spec);
  Prior prior = build_prior(spec);

  Models models = build_models(spec.config, data.train.dim(), prior.bank.dim());
  TrainState state = init_state(spec.config, models);
  TrainResult trained = train(spec.config, models, data.train, prior.bank, std::move(state),
                              prior.log_density);

  ExperimentOutputs out;
  out.metrics_csv = (fs::path(dir) / "metrics.csv").string();
  out.checkpoint = (fs::path(dir) / "checkpoint.json").string();
  out.prior_cloud_csv = (fs::path(dir) / "prior_samples.csv").string();
  out.posterior_cloud_csv = (fs::path(dir) / "posterior_means.csv").string();
  out.grid_csv = (fs::path(dir) / "grid_decodings.csv").string();
  out.eval_csv = (fs::path(dir) / "eval.csv").string();

  write_metrics_csv(out.metrics_csv, trained.log);
  checkpoint_save(trained.state, spec.config, models, out.checkpoint);

  const std::int64_t k = prior.bank.dim();
  write_matrix_csv(out.prior_cloud_csv, csv_header("z", k), prior.bank.samples);

  TensorValue post_means;
  {
    // encode only: m(x) for every held-out x
    Graph g;
    auto post = bind_conditional(g, models.posterior, trained.state.phi, true);
    post_means = cond_mean(g, post, g.constant(data.test.samples)).val();
  }
  write_matrix_csv(out.posterior_cloud_csv, csv_header("z", k) + ",label", post_means,
                   &data.test_labels);

  TensorValue grid = decode_grid(models, trained.state, prior.bank, spec.grid_side);
  write_matrix_csv(out.grid_csv, csv_header("z", k) + "," + csv_header("x", grid.cols() - k),
                   grid);

  SampleBank prior_eval = build_prior_eval_bank(spec, prior);
  out.eval = evaluate(models, trained.state, data.test, prior_eval);
  {
    std::ofstream f(out.eval_csv);
    if (!f) throw IoError("cannot write '" + out.eval_csv + "'");
    f << "mse_x,mse_z,n_test,n_prior\n"
      << format_double(out.eval.mse_x) << "," << format_double(out.eval.mse_z) << ","
      << out.eval.n_test << "," << out.eval.n_prior << "\n";
  }
  return out;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const ExperimentSpec& spec) {
  Dataset data = build_dataset(spec);
  Prior prior = build_prior(spec);
  Models models = build_models(spec.config, data.train.dim(), prior.bank.dim());
  TrainState state = checkpoint_load(checkpoint_path, spec.config, models);
  SampleBank prior_eval = build_prior_eval_bank(spec, prior);
  return evaluate(models, state, data.test, prior_eval);
}

}  // namespace ilvm
