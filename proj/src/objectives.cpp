#include "ilvm/objectives.hpp"

namespace ilvm {

DmVariant dm_variant_from_string(const std::string& s) {
  if (s == "a") return DmVariant::a;
  if (s == "b") return DmVariant::b;
  if (s == "c") return DmVariant::c;
  throw SpecError("unknown dm loss variant '" + s + "'");
}

double ObjectiveReport::sub(const std::string& name) const {
  for (const auto& [k, v] : sub_terms) {
    if (k == name) return v;
  }
  throw ContractError("no sub-term named '" + name + "'");
}

Tensor nell_term(Graph& g, const BoundConditional& likelihood, const BoundConditional& posterior,
                 Tensor x, Tensor eps) {
  Tensor z = rsample(g, posterior, x, eps);
  return neg(mean(log_prob(g, likelihood, z, x)));
}

Tensor nelp_term(Graph& g, const BoundConditional& likelihood, const BoundConditional& posterior,
                 Tensor z_prior, Tensor xi) {
  Tensor x = rsample(g, likelihood, z_prior, xi);
  return neg(mean(log_prob(g, posterior, x, z_prior)));
}

LogRatioFn net_log_ratio(const RatioNetSpec& spec, const BoundParams& params) {
  return [&spec, params](Graph& g, Tensor primary, Tensor conditioning) {
    return ratio_log(g, spec, params, primary, conditioning);
  };
}

LogRatioFn net_log_ratio_of(const RatioNetSpec& spec, const ParamSet& params) {
  return [&spec, &params](Graph& g, Tensor primary, Tensor conditioning) {
    BoundParams bound = bind(g, params, true);
    return ratio_log(g, spec, bound, primary, conditioning);
  };
}

namespace {

Tensor clamped_ratio(Graph& g, const RatioNetSpec& ratio, const BoundParams& rp, Tensor primary,
                     Tensor conditioning) {
  return clamp(ratio_log(g, ratio, rp, primary, conditioning), -kLogRatioClamp, kLogRatioClamp);
}

// Model-side sample for one direction: z ~ q(z|x) on reverse, x ~ p(x|z*) on
// forward; the bare mean map in deterministic mode.
Tensor model_side_sample(Graph& g, Direction dir, GanMode mode, const BoundConditional& cond,
                         Tensor batch, Tensor noise) {
  (void)dir;
  if (mode == GanMode::deterministic) return cond_mean(g, cond, batch);
  return rsample(g, cond, batch, noise);
}

}  // namespace

Tensor kl_dm_latent_term(Graph& g, const BoundConditional& posterior, const RatioNetSpec& ratio,
                         const BoundParams& ratio_params, Tensor x, Tensor eps) {
  Tensor z = rsample(g, posterior, x, eps);
  return mean(clamped_ratio(g, ratio, ratio_params, z, x));
}

Tensor kl_dm_observed_term(Graph& g, const BoundConditional& likelihood,
                           const RatioNetSpec& ratio, const BoundParams& ratio_params,
                           Tensor z_prior, Tensor xi) {
  Tensor x = rsample(g, likelihood, z_prior, xi);
  return mean(clamped_ratio(g, ratio, ratio_params, x, z_prior));
}

Tensor dm_loss_term(Graph& g, DmVariant variant, Direction dir,
                    const BoundConditional& conditional, const RatioNetSpec& ratio,
                    const BoundParams& ratio_params, Tensor batch, Tensor noise, GanMode mode) {
  Tensor sample = model_side_sample(g, dir, mode, conditional, batch, noise);
  Tensor s = clamp(ratio_log(g, ratio, ratio_params, sample, batch), -kLogRatioClamp,
                   kLogRatioClamp);
  switch (variant) {
    case DmVariant::a:
      return mean(log1m_discriminator(g, s));
    case DmVariant::b:
      return neg(mean(log_discriminator(g, s)));
    case DmVariant::c:
      return add(mean(log1m_discriminator(g, s)), neg(mean(log_discriminator(g, s))));
  }
  throw ContractError("dm_loss_term: bad variant");
}

Tensor gan_objective_term(Graph& g, Direction dir, GanMode mode,
                          const BoundConditional& conditional, const RatioNetSpec& ratio,
                          const BoundParams& ratio_params, Tensor x, Tensor z_prior,
                          Tensor noise) {
  Tensor real_primary;
  Tensor model_primary;
  Tensor conditioning;
  if (dir == Direction::reverse) {
    conditioning = x;
    real_primary = z_prior;
    model_primary = model_side_sample(g, dir, mode, conditional, x, noise);
  } else {
    conditioning = z_prior;
    real_primary = x;
    model_primary = model_side_sample(g, dir, mode, conditional, z_prior, noise);
  }
  Tensor s_real = clamped_ratio(g, ratio, ratio_params, real_primary, conditioning);
  Tensor s_model = clamped_ratio(g, ratio, ratio_params, model_primary, conditioning);
  return add(mean(log_discriminator(g, s_real)), mean(log1m_discriminator(g, s_model)));
}

Tensor cycle_loss_term(Graph& g, Direction dir, const BoundConditional& likelihood,
                       const BoundConditional& posterior, Tensor batch, int rho) {
  if (rho != 1 && rho != 2) {
    throw ContractError("cycle_loss: unsupported norm order " + std::to_string(rho));
  }
  Tensor roundtrip;
  if (dir == Direction::reverse) {
    roundtrip = cond_mean(g, likelihood, cond_mean(g, posterior, batch));
  } else {
    roundtrip = cond_mean(g, posterior, cond_mean(g, likelihood, batch));
  }
  Tensor diff = sub(batch, roundtrip);
  Tensor per_row = rho == 2 ? row_sum(square(diff)) : row_sum(abs(diff));
  return mean(per_row);
}

Tensor kliep_term(Graph& g, const BoundConditional& posterior, const RatioNetSpec& ratio,
                  const BoundParams& ratio_params, Tensor x, Tensor z_prior, Tensor eps,
                  double lambda) {
  if (lambda < 0) throw ContractError("kliep: lambda must be nonnegative");
  Tensor z = rsample(g, posterior, x, eps);
  Tensor s_post = clamped_ratio(g, ratio, ratio_params, z, x);
  Tensor s_prior = clamped_ratio(g, ratio, ratio_params, z_prior, x);
  Tensor fit = mean(s_post);
  if (lambda == 0) return fit;
  Tensor constraint = mean(add_scalar(exp(s_prior), -1.0));
  return sub(fit, mul_scalar(constraint, lambda));
}

Tensor analytic_kl_term(Graph& g, const BoundConditional& posterior, Tensor x, Tensor eps,
                        const PriorLogDensityFn& prior_log_density) {
  Tensor z = rsample(g, posterior, x, eps);
  Tensor lq = log_prob(g, posterior, x, z);
  Tensor lp = prior_log_density(g, z);
  return mean(sub(lq, lp));
}

// ---- value-level wrappers ---------------------------------------------------

double nell(const Conditional& lik, const ParamSet& theta, const Conditional& post,
            const ParamSet& phi, const TensorValue& x, const TensorValue& eps) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bp = bind_conditional(g, post, phi, true);
  return nell_term(g, bl, bp, g.constant(x), g.constant(eps)).val().scalar_value();
}

double nelp(const Conditional& lik, const ParamSet& theta, const Conditional& post,
            const ParamSet& phi, const TensorValue& z_prior, const TensorValue& xi) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bp = bind_conditional(g, post, phi, true);
  return nelp_term(g, bl, bp, g.constant(z_prior), g.constant(xi)).val().scalar_value();
}

double kl_dre_latent(const RatioNetSpec& ratio, const ParamSet& alpha, const Conditional& post,
                     const ParamSet& phi, const TensorValue& x, const TensorValue& z_prior,
                     const TensorValue& eps) {
  Graph g;
  auto bp = bind_conditional(g, post, phi, true);
  auto ba = bind(g, alpha, true);
  Tensor xs = g.constant(x);
  Tensor z = rsample(g, bp, xs, g.constant(eps));
  return dre_bound_latent_term(g, kl_f(), net_log_ratio(ratio, ba), xs, z,
                               g.constant(z_prior))
      .val()
      .scalar_value();
}

double kl_dre_observed(const RatioNetSpec& ratio, const ParamSet& beta, const Conditional& lik,
                       const ParamSet& theta, const TensorValue& z_prior, const TensorValue& xi,
                       const TensorValue& x_data) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bb = bind(g, beta, true);
  Tensor zs = g.constant(z_prior);
  Tensor x_model = rsample(g, bl, zs, g.constant(xi));
  return dre_bound_observed_term(g, kl_f(), net_log_ratio(ratio, bb), zs, x_model,
                                 g.constant(x_data))
      .val()
      .scalar_value();
}

double kl_dm_latent(const Conditional& post, const ParamSet& phi, const RatioNetSpec& ratio,
                    const ParamSet& alpha, const TensorValue& x, const TensorValue& eps) {
  Graph g;
  auto bp = bind_conditional(g, post, phi, true);
  auto ba = bind(g, alpha, true);
  return kl_dm_latent_term(g, bp, ratio, ba, g.constant(x), g.constant(eps))
      .val()
      .scalar_value();
}

double kl_dm_observed(const Conditional& lik, const ParamSet& theta, const RatioNetSpec& ratio,
                      const ParamSet& beta, const TensorValue& z_prior, const TensorValue& xi) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bb = bind(g, beta, true);
  return kl_dm_observed_term(g, bl, ratio, bb, g.constant(z_prior), g.constant(xi))
      .val()
      .scalar_value();
}

double gan_objective(Direction dir, GanMode mode, const Conditional& cond,
                     const ParamSet& cond_params, const RatioNetSpec& ratio,
                     const ParamSet& ratio_params, const TensorValue& x,
                     const TensorValue& z_prior, const TensorValue& noise) {
  Graph g;
  auto bc = bind_conditional(g, cond, cond_params, true);
  auto br = bind(g, ratio_params, true);
  return gan_objective_term(g, dir, mode, bc, ratio, br, g.constant(x), g.constant(z_prior),
                            g.constant(noise))
      .val()
      .scalar_value();
}

double dm_loss(DmVariant variant, Direction dir, const Conditional& cond,
               const ParamSet& cond_params, const RatioNetSpec& ratio,
               const ParamSet& ratio_params, const TensorValue& batch, const TensorValue& noise,
               GanMode mode) {
  Graph g;
  auto bc = bind_conditional(g, cond, cond_params, true);
  auto br = bind(g, ratio_params, true);
  return dm_loss_term(g, variant, dir, bc, ratio, br, g.constant(batch), g.constant(noise), mode)
      .val()
      .scalar_value();
}

double cycle_loss(Direction dir, const Conditional& lik, const ParamSet& theta,
                  const Conditional& post, const ParamSet& phi, const TensorValue& batch,
                  int rho) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bp = bind_conditional(g, post, phi, true);
  return cycle_loss_term(g, dir, bl, bp, g.constant(batch), rho).val().scalar_value();
}

double kliep_objective(const RatioNetSpec& ratio, const ParamSet& alpha, const Conditional& post,
                       const ParamSet& phi, const TensorValue& x, const TensorValue& z_prior,
                       const TensorValue& eps, double lambda) {
  Graph g;
  auto bp = bind_conditional(g, post, phi, true);
  auto ba = bind(g, alpha, true);
  return kliep_term(g, bp, ratio, ba, g.constant(x), g.constant(z_prior), g.constant(eps),
                    lambda)
      .val()
      .scalar_value();
}

ObjectiveReport symmetric_joint_report(const Conditional& lik, const ParamSet& theta,
                                       const Conditional& post, const ParamSet& phi,
                                       const RatioNetSpec& ratio_latent, const ParamSet& alpha,
                                       const RatioNetSpec& ratio_observed, const ParamSet& beta,
                                       const TensorValue& x, const TensorValue& z_prior,
                                       const TensorValue& eps, const TensorValue& xi) {
  Graph g;
  auto bl = bind_conditional(g, lik, theta, true);
  auto bp = bind_conditional(g, post, phi, true);
  auto ba = bind(g, alpha, true);
  auto bb = bind(g, beta, true);
  Tensor xs = g.constant(x);
  Tensor zs = g.constant(z_prior);
  Tensor es = g.constant(eps);
  Tensor ns = g.constant(xi);

  const double v_nell = nell_term(g, bl, bp, xs, es).val().scalar_value();
  const double v_dm_lat =
      kl_dm_latent_term(g, bp, ratio_latent, ba, xs, es).val().scalar_value();
  const double v_nelp = nelp_term(g, bl, bp, zs, ns).val().scalar_value();
  const double v_dm_obs =
      kl_dm_observed_term(g, bl, ratio_observed, bb, zs, ns).val().scalar_value();

  ObjectiveReport r;
  r.sub_terms = {{"nell", v_nell},
                 {"kl_dm_latent", v_dm_lat},
                 {"nelp", v_nelp},
                 {"kl_dm_observed", v_dm_obs}};
  r.value = v_nell + v_dm_lat + v_nelp + v_dm_obs;
  r.batch_data = x.rows();
  r.batch_prior = z_prior.rows();
  if (lik.scale > 0) r.reverse_limit = degenerate_limit_constants(lik.kind, lik.scale, lik.dim);
  if (post.scale > 0) r.forward_limit = degenerate_limit_constants(post.kind, post.scale, post.dim);
  return r;
}

}  // namespace ilvm
