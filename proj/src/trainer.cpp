#include "ilvm/trainer.hpp"

#include <cmath>
#include <fstream>

#include "ilvm/io.hpp"

namespace ilvm {

Mode mode_from_string(const std::string& s) {
  if (s == "sjmvi") return Mode::sjmvi;
  if (s == "cyclegan") return Mode::cyclegan;
  if (s == "vae-baseline") return Mode::vae_baseline;
  throw SpecError("unknown mode '" + s + "'");
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::sjmvi: return "sjmvi";
    case Mode::cyclegan: return "cyclegan";
    case Mode::vae_baseline: return "vae-baseline";
  }
  return "?";
}

DreForm dre_form_from_string(const std::string& s) {
  if (s == "gan") return DreForm::gan;
  if (s == "kl") return DreForm::kl;
  throw SpecError("unknown dre objective '" + s + "'");
}

const char* dre_form_name(DreForm f) { return f == DreForm::gan ? "gan" : "kl"; }

void TrainConfig::validate() const {
  if (steps < 0) throw ContractError("steps must be nonnegative");
  if (batch < 1) throw ContractError("batch must be positive");
  if (lr_model <= 0 || lr_ratio <= 0) throw ContractError("learning rates must be positive");
  if (ratio_steps < 1) throw ContractError("ratio_steps must be >= 1");
  if (noise_samples < 1) throw ContractError("noise_samples must be >= 1");
  if (rho != 1 && rho != 2) throw ContractError("rho must be 1 or 2");
  if (tau < 0 || t < 0) throw ContractError("scales must be nonnegative");
  if (mode != Mode::cyclegan && (tau == 0 || t == 0)) {
    throw ContractError("zero scales are only valid in cyclegan mode");
  }
  if (learn_scales && (tau == 0 || t == 0)) {
    throw ContractError("learned scales require positive initial values");
  }
  if (weight_elbo < 0 || weight_aplbo < 0 || cycle_weight < 0) {
    throw ContractError("loss weights must be nonnegative");
  }
  if (log_interval < 1) throw ContractError("log_interval must be positive");
}

Models build_models(const TrainConfig& cfg, std::int64_t data_dim, std::int64_t latent_dim) {
  cfg.validate();
  if (data_dim < 1 || latent_dim < 1) throw ContractError("bank dimensions must be positive");
  Models m;
  m.data_dim = data_dim;
  m.latent_dim = latent_dim;

  m.likelihood.kind = cfg.cond_kind;
  m.likelihood.mean_net.in_dim = latent_dim;
  m.likelihood.mean_net.hidden = cfg.map_hidden;
  m.likelihood.mean_net.out_dim = data_dim;
  m.likelihood.mean_net.act = cfg.map_act;
  m.likelihood.mean_net.linear_only = cfg.linear_maps;
  m.likelihood.mean_net.init_seed = rng_word(cfg.seed, stream_id::init, 1);
  m.likelihood.scale = cfg.tau;
  m.likelihood.learn_scale = cfg.learn_scales;
  m.likelihood.dim = data_dim;

  m.posterior.kind = cfg.cond_kind;
  m.posterior.mean_net.in_dim = data_dim;
  m.posterior.mean_net.hidden = cfg.map_hidden;
  m.posterior.mean_net.out_dim = latent_dim;
  m.posterior.mean_net.act = cfg.map_act;
  m.posterior.mean_net.linear_only = cfg.linear_maps;
  m.posterior.mean_net.init_seed = rng_word(cfg.seed, stream_id::init, 2);
  m.posterior.scale = cfg.t;
  m.posterior.learn_scale = cfg.learn_scales;
  m.posterior.dim = latent_dim;

  // In cyclegan mode the discriminators ignore their auxiliary
  // conditioning input and the maps are used deterministically.
  const bool ignore_cond = cfg.mode == Mode::cyclegan;
  m.ratio_latent = RatioNetSpec::make(latent_dim, data_dim, cfg.ratio_hidden, cfg.ratio_act,
                                      rng_word(cfg.seed, stream_id::init, 3), ignore_cond);
  m.ratio_observed = RatioNetSpec::make(data_dim, latent_dim, cfg.ratio_hidden, cfg.ratio_act,
                                        rng_word(cfg.seed, stream_id::init, 4), ignore_cond);
  return m;
}

TrainState init_state(const TrainConfig& cfg, const Models& models) {
  (void)cfg;
  TrainState s;
  s.theta = conditional_init(models.likelihood);
  s.phi = conditional_init(models.posterior);
  s.alpha = mlp_init(models.ratio_latent.net);
  s.beta = mlp_init(models.ratio_observed.net);
  s.m_theta = moments_like(s.theta);
  s.m_phi = moments_like(s.phi);
  s.m_alpha = moments_like(s.alpha);
  s.m_beta = moments_like(s.beta);
  return s;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "step,nell,nelp,dre_latent,dre_observed,dm_latent,dm_observed,total\n";
  for (const auto& r : rows) {
    out << r.step << "," << format_double(r.nell) << "," << format_double(r.nelp) << ","
        << format_double(r.dre_latent) << "," << format_double(r.dre_observed) << ","
        << format_double(r.dm_latent) << "," << format_double(r.dm_observed) << ","
        << format_double(r.total) << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

double finite_or_abort(double v, std::int64_t step, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericError("step " + std::to_string(step) + ": sub-term '" + term +
                       "' is non-finite");
  }
  return v;
}

// DM term of the configured variant on an already clamped log ratio batch.
Tensor dm_of_variant(Graph& g, DmVariant v, Tensor s_clamped) {
  switch (v) {
    case DmVariant::a: return mean(log1m_discriminator(g, s_clamped));
    case DmVariant::b: return neg(mean(log_discriminator(g, s_clamped)));
    case DmVariant::c:
      return add(mean(log1m_discriminator(g, s_clamped)),
                 neg(mean(log_discriminator(g, s_clamped))));
  }
  throw ContractError("bad dm variant");
}

}  // namespace

namespace {

// Repeat the batch for multi-sample reparameterized expectations.
TensorValue replicate_rows(const TensorValue& m, std::int64_t times) {
  if (times == 1) return m;
  TensorValue out = TensorValue::zeros({m.rows() * times, m.cols()});
  for (std::int64_t r = 0; r < times; ++r) {
    for (std::int64_t i = 0; i < m.rows(); ++i) {
      for (std::int64_t j = 0; j < m.cols(); ++j) out.at(r * m.rows() + i, j) = m.at(i, j);
    }
  }
  return out;
}

}  // namespace

RatioMetrics ratio_updates(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                           const SampleBank& prior, TrainState& state) {
  const FDivergence fdiv = cfg.dre_form == DreForm::gan ? gan_f() : kl_f();
  const std::int64_t B = cfg.batch;
  const bool deterministic_maps = cfg.mode == Mode::cyclegan;

  RngStream data_s(cfg.seed, stream_id::data_batch, state.cursors.data);
  RngStream prior_s(cfg.seed, stream_id::prior_batch, state.cursors.prior);
  RngStream eps_s(cfg.seed, stream_id::posterior_noise, state.cursors.eps);
  RngStream xi_s(cfg.seed, stream_id::likelihood_noise, state.cursors.xi);

  RatioMetrics out;
  for (std::int64_t r = 0; r < cfg.ratio_steps; ++r) {
    // alpha: ratio ascent on the latent-side DRE objective
    {
      TensorValue xb = replicate_rows(draw_minibatch(data, B, data_s), cfg.noise_samples);
      const std::int64_t n = xb.rows();
      TensorValue zb = draw_minibatch(prior, n, prior_s);
      TensorValue eps = draw_base_noise(models.posterior.kind, {n, models.latent_dim}, eps_s);
      Graph g;
      auto post = bind_conditional(g, models.posterior, state.phi, true);
      auto alpha = bind(g, state.alpha, false);
      Tensor x = g.constant(xb);
      Tensor z_model = deterministic_maps ? cond_mean(g, post, x)
                                          : rsample(g, post, x, g.constant(eps));
      Tensor obj = dre_bound_latent_term(g, fdiv, net_log_ratio(models.ratio_latent, alpha), x,
                                         z_model, g.constant(zb));
      out.dre_latent = obj.val().scalar_value();
      auto grads = extract_grads(alpha, g.backward(neg(obj)));
      optimizer_step(cfg.optimizer, state.alpha, grads, state.m_alpha, cfg.lr_ratio, cfg.adam);
    }
    // beta: ratio ascent on the observed-side DRE objective
    {
      TensorValue zb = replicate_rows(draw_minibatch(prior, B, prior_s), cfg.noise_samples);
      const std::int64_t n = zb.rows();
      TensorValue xb = draw_minibatch(data, n, data_s);
      TensorValue xi = draw_base_noise(models.likelihood.kind, {n, models.data_dim}, xi_s);
      Graph g;
      auto lik = bind_conditional(g, models.likelihood, state.theta, true);
      auto beta = bind(g, state.beta, false);
      Tensor z = g.constant(zb);
      Tensor x_model = deterministic_maps ? cond_mean(g, lik, z)
                                          : rsample(g, lik, z, g.constant(xi));
      Tensor obj = dre_bound_observed_term(g, fdiv, net_log_ratio(models.ratio_observed, beta),
                                           z, x_model, g.constant(xb));
      out.dre_observed = obj.val().scalar_value();
      auto grads = extract_grads(beta, g.backward(neg(obj)));
      optimizer_step(cfg.optimizer, state.beta, grads, state.m_beta, cfg.lr_ratio, cfg.adam);
    }
  }

  state.cursors.data = data_s.counter;
  state.cursors.prior = prior_s.counter;
  state.cursors.eps = eps_s.counter;
  state.cursors.xi = xi_s.counter;
  return out;
}

MetricRow model_update(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                       const SampleBank& prior, TrainState& state,
                       const PriorLogDensityFn& prior_log_density, std::int64_t step) {
  const std::int64_t B = cfg.batch;

  RngStream data_s(cfg.seed, stream_id::data_batch, state.cursors.data);
  RngStream prior_s(cfg.seed, stream_id::prior_batch, state.cursors.prior);
  RngStream eps_s(cfg.seed, stream_id::posterior_noise, state.cursors.eps);
  RngStream xi_s(cfg.seed, stream_id::likelihood_noise, state.cursors.xi);

  TensorValue xb = replicate_rows(draw_minibatch(data, B, data_s), cfg.noise_samples);
  TensorValue zb = replicate_rows(draw_minibatch(prior, B, prior_s), cfg.noise_samples);
  const std::int64_t n = xb.rows();
  TensorValue eps = draw_base_noise(models.posterior.kind, {n, models.latent_dim}, eps_s);
  TensorValue xi = draw_base_noise(models.likelihood.kind, {n, models.data_dim}, xi_s);

  MetricRow row;
  row.step = step;

  Graph g;
  auto lik = bind_conditional(g, models.likelihood, state.theta, false);
  auto post = bind_conditional(g, models.posterior, state.phi, false);
  auto alpha = bind(g, state.alpha, true);
  auto beta = bind(g, state.beta, true);
  Tensor x = g.constant(xb);
  Tensor z_prior = g.constant(zb);

  Tensor total;
  if (cfg.mode == Mode::sjmvi) {
    Tensor z = rsample(g, post, x, g.constant(eps));
    Tensor v_nell = neg(mean(log_prob(g, lik, z, x)));
    Tensor s_lat = clamp(ratio_log(g, models.ratio_latent, alpha, z, x), -kLogRatioClamp,
                         kLogRatioClamp);
    Tensor v_dm_lat = dm_of_variant(g, cfg.dm_variant, s_lat);

    Tensor x_model = rsample(g, lik, z_prior, g.constant(xi));
    Tensor v_nelp = neg(mean(log_prob(g, post, x_model, z_prior)));
    Tensor s_obs = clamp(ratio_log(g, models.ratio_observed, beta, x_model, z_prior),
                         -kLogRatioClamp, kLogRatioClamp);
    Tensor v_dm_obs = dm_of_variant(g, cfg.dm_variant, s_obs);

    total = add(mul_scalar(add(v_nell, v_dm_lat), cfg.weight_elbo),
                mul_scalar(add(v_nelp, v_dm_obs), cfg.weight_aplbo));
    row.nell = finite_or_abort(v_nell.val().scalar_value(), step, "nell");
    row.nelp = finite_or_abort(v_nelp.val().scalar_value(), step, "nelp");
    row.dm_latent = finite_or_abort(v_dm_lat.val().scalar_value(), step, "dm_latent");
    row.dm_observed = finite_or_abort(v_dm_obs.val().scalar_value(), step, "dm_observed");
  } else if (cfg.mode == Mode::cyclegan) {
    Tensor z = cond_mean(g, post, x);
    Tensor x_rec = cond_mean(g, lik, z);
    Tensor d_rev = sub(x, x_rec);
    Tensor v_cyc_rev = mean(cfg.rho == 2 ? row_sum(square(d_rev)) : row_sum(abs(d_rev)));
    Tensor s_lat = clamp(ratio_log(g, models.ratio_latent, alpha, z, x), -kLogRatioClamp,
                         kLogRatioClamp);
    Tensor v_dm_lat = dm_of_variant(g, cfg.dm_variant, s_lat);

    Tensor x_model = cond_mean(g, lik, z_prior);
    Tensor z_rec = cond_mean(g, post, x_model);
    Tensor d_fwd = sub(z_prior, z_rec);
    Tensor v_cyc_fwd = mean(cfg.rho == 2 ? row_sum(square(d_fwd)) : row_sum(abs(d_fwd)));
    Tensor s_obs = clamp(ratio_log(g, models.ratio_observed, beta, x_model, z_prior),
                         -kLogRatioClamp, kLogRatioClamp);
    Tensor v_dm_obs = dm_of_variant(g, cfg.dm_variant, s_obs);

    total = add(
        mul_scalar(add(v_dm_lat, mul_scalar(v_cyc_rev, cfg.cycle_weight)), cfg.weight_elbo),
        mul_scalar(add(v_dm_obs, mul_scalar(v_cyc_fwd, cfg.cycle_weight)), cfg.weight_aplbo));
    // Reconstruction losses play the nell/nelp roles in this mode.
    row.nell = finite_or_abort(v_cyc_rev.val().scalar_value(), step, "cycle_reverse");
    row.nelp = finite_or_abort(v_cyc_fwd.val().scalar_value(), step, "cycle_forward");
    row.dm_latent = finite_or_abort(v_dm_lat.val().scalar_value(), step, "dm_latent");
    row.dm_observed = finite_or_abort(v_dm_obs.val().scalar_value(), step, "dm_observed");
  } else {  // vae-baseline: NELBO with the analytic prior density
    Tensor z = rsample(g, post, x, g.constant(eps));
    Tensor v_nell = neg(mean(log_prob(g, lik, z, x)));
    Tensor lq = log_prob(g, post, x, z);
    Tensor lp = prior_log_density(g, z);
    Tensor v_kl = mean(sub(lq, lp));
    total = mul_scalar(add(v_nell, v_kl), cfg.weight_elbo);
    row.nell = finite_or_abort(v_nell.val().scalar_value(), step, "nell");
    row.dm_latent = finite_or_abort(v_kl.val().scalar_value(), step, "analytic_kl");
  }

  row.total = finite_or_abort(total.val().scalar_value(), step, "total");
  auto gm = g.backward(total);
  auto g_theta = extract_grads(lik.params, gm);
  auto g_phi = extract_grads(post.params, gm);
  optimizer_step(cfg.optimizer, state.theta, g_theta, state.m_theta, cfg.lr_model, cfg.adam);
  optimizer_step(cfg.optimizer, state.phi, g_phi, state.m_phi, cfg.lr_model, cfg.adam);

  state.cursors.data = data_s.counter;
  state.cursors.prior = prior_s.counter;
  state.cursors.eps = eps_s.counter;
  state.cursors.xi = xi_s.counter;
  return row;
}

TrainResult train(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                  const SampleBank& prior, TrainState state,
                  const PriorLogDensityFn& prior_log_density) {
  cfg.validate();
  if (data.count() < 1 || prior.count() < 1) throw ContractError("train: empty bank");
  if (data.dim() != models.data_dim || prior.dim() != models.latent_dim) {
    throw ContractError("train: bank dimensions do not match the models");
  }
  if (cfg.mode == Mode::vae_baseline && !prior_log_density) {
    throw ContractError("vae-baseline mode requires an analytic prior log density");
  }

  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.steps / cfg.log_interval + 2));

  for (std::int64_t it = 0; it < cfg.steps; ++it) {
    const std::int64_t step = state.step + 1;
    try {
      RatioMetrics ratio_out;
      if (cfg.mode != Mode::vae_baseline) {
        ratio_out = ratio_updates(cfg, models, data, prior, state);
        finite_or_abort(ratio_out.dre_latent, step, "dre_latent");
        finite_or_abort(ratio_out.dre_observed, step, "dre_observed");
      }
      MetricRow row = model_update(cfg, models, data, prior, state, prior_log_density, step);
      row.dre_latent = ratio_out.dre_latent;
      row.dre_observed = ratio_out.dre_observed;
      state.step = step;
      if (step % cfg.log_interval == 0) result.log.push_back(row);
    } catch (const NumericError& e) {
      const std::string what = e.what();
      if (what.rfind("step ", 0) == 0) throw;
      throw NumericError("step " + std::to_string(step) + ": " + what);
    }
  }

  result.state = std::move(state);
  return result;
}

}  // namespace ilvm
