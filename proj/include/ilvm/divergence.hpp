#pragma once

#include <functional>
#include <string>

#include "ilvm/tensor.hpp"

namespace ilvm {

// Convex-function bundle for one f-divergence setting: f, its derivative,
// its convex conjugate, and the closed-form stable composition fstar(fprime).
// The tensor forms consume log-ratio inputs so the ratio itself never has to
// be exponentiated outside controlled places.
struct FDivergence {
  std::string name;
  std::function<double(double)> f;                // u-space
  std::function<double(double)> fprime;           // u-space
  std::function<double(double)> fstar;            // t-space
  std::function<double(double)> fstar_of_fprime;  // u-space, closed form
  std::function<Tensor(Graph&, Tensor)> fprime_log;           // log-ratio input
  std::function<Tensor(Graph&, Tensor)> fstar_of_fprime_log;  // log-ratio input
};

// Reverse KL setting f(u) = u log u:
//   fstar(t) = exp(t - 1), fprime(u) = 1 + log u, fstar(fprime(u)) = u.
FDivergence kl_f();

// GAN setting f(u) = u log u - (u+1) log(u+1):
//   fstar(t) = -log(1 - exp t)       (domain t < 0),
//   fprime(u) = log sigmoid(log u),
//   fstar(fprime(u)) = -log(1 - sigmoid(log u)).
FDivergence gan_f();

// Log-ratio values are clipped to this symmetric range inside objective
// evaluation (gradient passes through inside the range).
inline constexpr double kLogRatioClamp = 30.0;

// Amortized log ratio as a function of (primary, conditioning) batches.
using LogRatioFn = std::function<Tensor(Graph&, Tensor primary, Tensor conditioning)>;

// Monte Carlo estimate of the variational lower bound on the expected
// f-divergence between the implicit prior and the posterior, computed in
// log-ratio space:
//   mean[fprime(r(z_post; x))] - mean[fstar(fprime(r(z_prior; x)))].
// Rows of z_posterior pair with rows of x; all three batches equal length.
Tensor dre_bound_latent_term(Graph& g, const FDivergence& fdiv, const LogRatioFn& log_ratio,
                             Tensor x, Tensor z_posterior, Tensor z_prior);

// Mirror image with the roles of x and z exchanged:
//   mean[fprime(r(x_model; z))] - mean[fstar(fprime(r(x_data; z)))].
Tensor dre_bound_observed_term(Graph& g, const FDivergence& fdiv, const LogRatioFn& log_ratio,
                               Tensor z, Tensor x_model, Tensor x_data);

// Value-level wrappers over constant batches.
double dre_bound_latent(const FDivergence& fdiv, const LogRatioFn& log_ratio,
                        const TensorValue& x, const TensorValue& z_posterior,
                        const TensorValue& z_prior);
double dre_bound_observed(const FDivergence& fdiv, const LogRatioFn& log_ratio,
                          const TensorValue& z, const TensorValue& x_model,
                          const TensorValue& x_data);

}  // namespace ilvm
