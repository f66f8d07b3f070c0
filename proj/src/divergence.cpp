#include "ilvm/divergence.hpp"

#include <cmath>

namespace ilvm {

namespace {

double check_ratio_domain(double u, const char* fn) {
  if (u <= 0) {
    throw DomainError(std::string(fn) + ": ratio argument " + std::to_string(u) +
                      " is not positive");
  }
  return u;
}

}  // namespace

FDivergence kl_f() {
  FDivergence d;
  d.name = "kl";
  d.f = [](double u) {
    check_ratio_domain(u, "kl.f");
    return u * std::log(u);
  };
  d.fprime = [](double u) {
    check_ratio_domain(u, "kl.fprime");
    return 1.0 + std::log(u);
  };
  d.fstar = [](double t) { return std::exp(t - 1.0); };
  d.fstar_of_fprime = [](double u) {
    check_ratio_domain(u, "kl.fstar_of_fprime");
    return u;
  };
  d.fprime_log = [](Graph&, Tensor s) { return add_scalar(s, 1.0); };
  d.fstar_of_fprime_log = [](Graph&, Tensor s) { return exp(s); };
  return d;
}

FDivergence gan_f() {
  FDivergence d;
  d.name = "gan";
  d.f = [](double u) {
    check_ratio_domain(u, "gan.f");
    return u * std::log(u) - (u + 1.0) * std::log1p(u);
  };
  d.fprime = [](double u) {
    check_ratio_domain(u, "gan.fprime");
    // log sigmoid(log u) = log u - log(1 + u)
    return std::log(u) - std::log1p(u);
  };
  d.fstar = [](double t) {
    if (t >= 0) {
      throw DomainError("gan.fstar: argument " + std::to_string(t) + " outside domain t < 0");
    }
    return -std::log1p(-std::exp(t));
  };
  d.fstar_of_fprime = [](double u) {
    check_ratio_domain(u, "gan.fstar_of_fprime");
    // -log(1 - sigmoid(log u)) = log(1 + u)
    return std::log1p(u);
  };
  d.fprime_log = [](Graph&, Tensor s) { return log_sigmoid(s); };
  d.fstar_of_fprime_log = [](Graph&, Tensor s) { return softplus(s); };
  return d;
}

namespace {

void check_batches(const char* where, const TensorValue& a, const TensorValue& b,
                   const TensorValue& c) {
  if (a.rank() != 2 || b.rank() != 2 || c.rank() != 2 || a.rows() != b.rows() ||
      a.rows() != c.rows()) {
    throw ShapeError(std::string(where) + ": batch lengths " + shape_str(a.shape) + ", " +
                     shape_str(b.shape) + ", " + shape_str(c.shape) + " do not match");
  }
}

}  // namespace

Tensor dre_bound_latent_term(Graph& g, const FDivergence& fdiv, const LogRatioFn& log_ratio,
                             Tensor x, Tensor z_posterior, Tensor z_prior) {
  check_batches("dre_bound_latent", x.val(), z_posterior.val(), z_prior.val());
  Tensor s_post = clamp(log_ratio(g, z_posterior, x), -kLogRatioClamp, kLogRatioClamp);
  Tensor s_prior = clamp(log_ratio(g, z_prior, x), -kLogRatioClamp, kLogRatioClamp);
  return sub(mean(fdiv.fprime_log(g, s_post)), mean(fdiv.fstar_of_fprime_log(g, s_prior)));
}

Tensor dre_bound_observed_term(Graph& g, const FDivergence& fdiv, const LogRatioFn& log_ratio,
                               Tensor z, Tensor x_model, Tensor x_data) {
  check_batches("dre_bound_observed", z.val(), x_model.val(), x_data.val());
  Tensor s_model = clamp(log_ratio(g, x_model, z), -kLogRatioClamp, kLogRatioClamp);
  Tensor s_data = clamp(log_ratio(g, x_data, z), -kLogRatioClamp, kLogRatioClamp);
  return sub(mean(fdiv.fprime_log(g, s_model)), mean(fdiv.fstar_of_fprime_log(g, s_data)));
}

double dre_bound_latent(const FDivergence& fdiv, const LogRatioFn& log_ratio,
                        const TensorValue& x, const TensorValue& z_posterior,
                        const TensorValue& z_prior) {
  Graph g;
  return dre_bound_latent_term(g, fdiv, log_ratio, g.constant(x), g.constant(z_posterior),
                               g.constant(z_prior))
      .val()
      .scalar_value();
}

double dre_bound_observed(const FDivergence& fdiv, const LogRatioFn& log_ratio,
                          const TensorValue& z, const TensorValue& x_model,
                          const TensorValue& x_data) {
  Graph g;
  return dre_bound_observed_term(g, fdiv, log_ratio, g.constant(z), g.constant(x_model),
                                 g.constant(x_data))
      .val()
      .scalar_value();
}

}  // namespace ilvm
