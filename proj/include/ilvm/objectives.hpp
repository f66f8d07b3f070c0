#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ilvm/distributions.hpp"
#include "ilvm/divergence.hpp"
#include "ilvm/models.hpp"

namespace ilvm {

enum class Direction { reverse, forward };
enum class GanMode { stochastic, deterministic };
enum class DmVariant { a, b, c };

DmVariant dm_variant_from_string(const std::string& s);

// Scalar objective value with its named sub-terms. Where a decomposition is
// claimed, value equals the sum of sub-terms (up to rounding).
struct ObjectiveReport {
  double value = 0;
  std::vector<std::pair<std::string, double>> sub_terms;
  std::int64_t batch_data = 0;
  std::int64_t batch_prior = 0;
  GammaDelta reverse_limit;  // gamma1/delta1 of the likelihood scale
  GammaDelta forward_limit;  // gamma2/delta2 of the posterior scale

  double sub(const std::string& name) const;
};

// ---- tape-level terms ------------------------------------------------------
// All take bound parameter sets; the caller decides what is tracked and what
// is frozen. Noise tensors are explicit so evaluations are deterministic.

// mean over the batch of -log p(x | G(eps; x)).
Tensor nell_term(Graph& g, const BoundConditional& likelihood, const BoundConditional& posterior,
                 Tensor x, Tensor eps);

// mean over the batch of -log q(z | F(xi; z)).
Tensor nelp_term(Graph& g, const BoundConditional& likelihood, const BoundConditional& posterior,
                 Tensor z_prior, Tensor xi);

// LogRatioFn backed by an existing ratio net binding (tape-level use).
LogRatioFn net_log_ratio(const RatioNetSpec& spec, const BoundParams& params);

// LogRatioFn that freshly binds the given parameters (frozen) on whichever
// graph invokes it. The spec and params must outlive the function.
LogRatioFn net_log_ratio_of(const RatioNetSpec& spec, const ParamSet& params);

// Divergence-minimization losses over q*(x) q(z|x) (reverse) or
// p*(z) p(x|z) (forward). The ratio parameters are expected to be bound
// frozen. Variant a = E[log(1-D)], b = E[-log D], c = a + b; kl is the
// literal E[log r] of the KL divergence estimate.
Tensor kl_dm_latent_term(Graph& g, const BoundConditional& posterior, const RatioNetSpec& ratio,
                         const BoundParams& ratio_params, Tensor x, Tensor eps);
Tensor kl_dm_observed_term(Graph& g, const BoundConditional& likelihood,
                           const RatioNetSpec& ratio, const BoundParams& ratio_params,
                           Tensor z_prior, Tensor xi);
Tensor dm_loss_term(Graph& g, DmVariant variant, Direction dir,
                    const BoundConditional& conditional, const RatioNetSpec& ratio,
                    const BoundParams& ratio_params, Tensor batch, Tensor noise,
                    GanMode mode = GanMode::stochastic);

// GAN objective (scoring-rule form) in stable log space:
//   reverse: E[log D(z*; x)] + E[log(1 - D(z; x))],  z ~ q(z|x)
//   forward: E[log D(x; z*)] + E[log(1 - D(x~; z*))], x~ ~ p(x|z*)
// Deterministic mode replaces the sampled side with the bare mean map.
Tensor gan_objective_term(Graph& g, Direction dir, GanMode mode,
                          const BoundConditional& conditional, const RatioNetSpec& ratio,
                          const BoundParams& ratio_params, Tensor x, Tensor z_prior,
                          Tensor noise);

// Roundtrip reconstruction penalty E || v - roundtrip(v) ||_rho^rho using the
// mean maps only. reverse reconstructs x, forward reconstructs z.
Tensor cycle_loss_term(Graph& g, Direction dir, const BoundConditional& likelihood,
                       const BoundConditional& posterior, Tensor batch, int rho);

// Lagrangian ratio-fitting objective
//   E[log r(z; x)] - lambda * E[r(z*; x) - 1];  lambda = 1 recovers the KL
// lower-bound objective.
Tensor kliep_term(Graph& g, const BoundConditional& posterior, const RatioNetSpec& ratio,
                  const BoundParams& ratio_params, Tensor x, Tensor z_prior, Tensor eps,
                  double lambda);

// Single-sample estimate of E[log q(z|x) - prior_log_density(z)], z ~ q(z|x).
using PriorLogDensityFn = std::function<Tensor(Graph&, Tensor)>;
Tensor analytic_kl_term(Graph& g, const BoundConditional& posterior, Tensor x, Tensor eps,
                        const PriorLogDensityFn& prior_log_density);

// ---- value-level operations -----------------------------------------------

double nell(const Conditional& lik, const ParamSet& theta, const Conditional& post,
            const ParamSet& phi, const TensorValue& x, const TensorValue& eps);
double nelp(const Conditional& lik, const ParamSet& theta, const Conditional& post,
            const ParamSet& phi, const TensorValue& z_prior, const TensorValue& xi);

double kl_dre_latent(const RatioNetSpec& ratio, const ParamSet& alpha, const Conditional& post,
                     const ParamSet& phi, const TensorValue& x, const TensorValue& z_prior,
                     const TensorValue& eps);
double kl_dre_observed(const RatioNetSpec& ratio, const ParamSet& beta, const Conditional& lik,
                       const ParamSet& theta, const TensorValue& z_prior, const TensorValue& xi,
                       const TensorValue& x_data);

double kl_dm_latent(const Conditional& post, const ParamSet& phi, const RatioNetSpec& ratio,
                    const ParamSet& alpha, const TensorValue& x, const TensorValue& eps);
double kl_dm_observed(const Conditional& lik, const ParamSet& theta, const RatioNetSpec& ratio,
                      const ParamSet& beta, const TensorValue& z_prior, const TensorValue& xi);

double gan_objective(Direction dir, GanMode mode, const Conditional& cond,
                     const ParamSet& cond_params, const RatioNetSpec& ratio,
                     const ParamSet& ratio_params, const TensorValue& x,
                     const TensorValue& z_prior, const TensorValue& noise);

double dm_loss(DmVariant variant, Direction dir, const Conditional& cond,
               const ParamSet& cond_params, const RatioNetSpec& ratio,
               const ParamSet& ratio_params, const TensorValue& batch,
               const TensorValue& noise, GanMode mode = GanMode::stochastic);

double cycle_loss(Direction dir, const Conditional& lik, const ParamSet& theta,
                  const Conditional& post, const ParamSet& phi, const TensorValue& batch,
                  int rho);

double kliep_objective(const RatioNetSpec& ratio, const ParamSet& alpha, const Conditional& post,
                       const ParamSet& phi, const TensorValue& x, const TensorValue& z_prior,
                       const TensorValue& eps, double lambda);

// Sub-terms {nell, kl_dm_latent, nelp, kl_dm_observed} of the symmetric
// joint-matching target and their sum (unit weights). The entropy constants
// of the data and prior distributions are omitted: they do not depend on any
// trained parameter.
ObjectiveReport symmetric_joint_report(const Conditional& lik, const ParamSet& theta,
                                       const Conditional& post, const ParamSet& phi,
                                       const RatioNetSpec& ratio_latent, const ParamSet& alpha,
                                       const RatioNetSpec& ratio_observed, const ParamSet& beta,
                                       const TensorValue& x, const TensorValue& z_prior,
                                       const TensorValue& eps, const TensorValue& xi);

}  // namespace ilvm
