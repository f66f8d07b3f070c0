#include "ilvm/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ilvm/experiment.hpp"
#include "ilvm/objectives.hpp"

namespace ilvm {

namespace {

struct Harness {
  std::ostream& out;
  bool verbose;
  int failures = 0;

  void check(const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string detail;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    if (ok) {
      out << "[ok]   " << name << "\n";
    } else {
      ++failures;
      out << "[FAIL] " << name;
      if (!detail.empty()) out << " (" << detail << ")";
      out << "\n";
    }
  }
};

struct Fixture {
  Conditional lik;
  Conditional post;
  RatioNetSpec ratio_lat;
  RatioNetSpec ratio_obs;
  ParamSet theta, phi, alpha, beta;
  TensorValue x, z_prior, eps, xi;
};

// Small random nets and batches; ratio output layers perturbed away from the
// zero init so the identities are exercised at nontrivial log ratios.
Fixture make_fixture(std::uint64_t seed, bool ignore_cond, double scale_t, double scale_tau) {
  const std::int64_t D = 3;
  const std::int64_t K = 2;
  const std::int64_t B = 16;
  Fixture f;
  f.lik = Conditional{CondKind::gaussian,
                      MlpSpec{K, {8}, D, Activation::tanh, rng_word(seed, 0, 1), false, false,
                              false},
                      scale_tau, false, D};
  f.post = Conditional{CondKind::gaussian,
                       MlpSpec{D, {8}, K, Activation::tanh, rng_word(seed, 0, 2), false, false,
                               false},
                       scale_t, false, K};
  f.ratio_lat = RatioNetSpec::make(K, D, {8}, Activation::tanh, rng_word(seed, 0, 3), ignore_cond);
  f.ratio_obs = RatioNetSpec::make(D, K, {8}, Activation::tanh, rng_word(seed, 0, 4), ignore_cond);
  f.theta = conditional_init(f.lik);
  f.phi = conditional_init(f.post);
  f.alpha = mlp_init(f.ratio_lat.net);
  f.beta = mlp_init(f.ratio_obs.net);
  RngStream rs(seed, 11);
  for (auto name : {"w1", "b1"}) {
    for (auto& v : f.alpha.by_name(name).data) v = 0.5 * rs.next_normal();
    for (auto& v : f.beta.by_name(name).data) v = 0.5 * rs.next_normal();
  }
  f.x = TensorValue({B, D}, rs.normal_vector(static_cast<std::size_t>(B * D)));
  f.z_prior = TensorValue({B, K}, rs.normal_vector(static_cast<std::size_t>(B * K)));
  f.eps = TensorValue({B, K}, rs.normal_vector(static_cast<std::size_t>(B * K)));
  f.xi = TensorValue({B, D}, rs.normal_vector(static_cast<std::size_t>(B * D)));
  return f;
}

}  // namespace

int selftest_run(std::ostream& out, bool verbose) {
  Harness h{out, verbose};

  h.check("convex calculus closed forms (grid 1e-3..1e3)", [] {
    for (const auto& fd : {kl_f(), gan_f()}) {
      const double f1 = fd.name == "kl" ? 0.0 : -std::log(4.0);
      if (std::abs(fd.f(1.0) - f1) > 1e-12) return false;
      double prev_u = 0, prev_f = 0, prev_slope = 0;
      int i = 0;
      for (int j = 0; j < 200; ++j) {
        const double u = std::pow(10.0, -3.0 + 6.0 * j / 199.0);
        const double composed = fd.fstar(fd.fprime(u));
        if (std::abs(composed - fd.fstar_of_fprime(u)) > 1e-10) return false;
        const double fu = fd.f(u);
        if (i >= 1) {
          const double slope = (fu - prev_f) / (u - prev_u);
          if (i >= 2 && slope - prev_slope < -1e-9) return false;
          prev_slope = slope;
        }
        prev_u = u;
        prev_f = fu;
        ++i;
      }
    }
    return true;
  });

  h.check("log-odds of the ratio discriminator", [] {
    for (double s = -20; s <= 20; s += 0.5) {
      Graph g;
      Tensor lr = g.constant(TensorValue::scalar(s));
      const double log_d = log_discriminator(g, lr).val().scalar_value();
      const double log_1md = log1m_discriminator(g, lr).val().scalar_value();
      if (std::abs((log_d - log_1md) + s) > 1e-10) return false;
    }
    return true;
  });

  h.check("dm variant c equals the KL minimization loss", [] {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Fixture f = make_fixture(100 + s, false, 0.3, 0.2);
      const double c = dm_loss(DmVariant::c, Direction::reverse, f.post, f.phi, f.ratio_lat,
                               f.alpha, f.x, f.eps);
      const double kl = kl_dm_latent(f.post, f.phi, f.ratio_lat, f.alpha, f.x, f.eps);
      if (std::abs(c - kl) > 1e-12) return false;
    }
    return true;
  });

  h.check("gan objective equals the f-divergence bound at f_gan", [] {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Fixture f = make_fixture(200 + s, false, 0.3, 0.2);
      const double a = gan_objective(Direction::reverse, GanMode::stochastic, f.post, f.phi,
                                     f.ratio_lat, f.alpha, f.x, f.z_prior, f.eps);
      Graph g;
      auto post = bind_conditional(g, f.post, f.phi, true);
      auto alpha = bind(g, f.alpha, true);
      Tensor x = g.constant(f.x);
      Tensor z = rsample(g, post, x, g.constant(f.eps));
      const double b = dre_bound_latent_term(g, gan_f(), net_log_ratio(f.ratio_lat, alpha), x, z,
                                             g.constant(f.z_prior))
                           .val()
                           .scalar_value();
      if (std::abs(a - b) > 1e-12) return false;
    }
    return true;
  });

  h.check("stochastic objective reduces to deterministic under ignore-flags", [] {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Fixture f = make_fixture(300 + s, true, 0.0, 0.0);
      const double stoch = gan_objective(Direction::reverse, GanMode::stochastic, f.post, f.phi,
                                         f.ratio_lat, f.alpha, f.x, f.z_prior, f.eps);
      const double det = gan_objective(Direction::reverse, GanMode::deterministic, f.post, f.phi,
                                       f.ratio_lat, f.alpha, f.x, f.z_prior, f.eps);
      if (stoch != det) return false;
    }
    return true;
  });

  h.check("lagrangian ratio objective at lambda=1 equals the KL bound", [] {
    for (std::uint64_t s = 0; s < 10; ++s) {
      Fixture f = make_fixture(400 + s, false, 0.3, 0.2);
      const double a =
          kliep_objective(f.ratio_lat, f.alpha, f.post, f.phi, f.x, f.z_prior, f.eps, 1.0);
      const double b =
          kl_dre_latent(f.ratio_lat, f.alpha, f.post, f.phi, f.x, f.z_prior, f.eps);
      if (std::abs(a - b) > 1e-12) return false;
    }
    return true;
  });

  h.check("objective gradients match central differences", [] {
    Fixture f = make_fixture(500, false, 0.3, 0.2);
    // nell wrt (theta, phi)
    auto fn = [&](Graph& g, const std::vector<Tensor>& p) {
      BoundParams bt{&f.theta, {p.begin(), p.begin() + f.theta.size()}, false};
      BoundParams bp{&f.phi, {p.begin() + f.theta.size(), p.end()}, false};
      BoundConditional lik{&f.lik, bt};
      BoundConditional post{&f.post, bp};
      return nell_term(g, lik, post, g.constant(f.x), g.constant(f.eps));
    };
    std::vector<TensorValue> params = f.theta.values;
    params.insert(params.end(), f.phi.values.begin(), f.phi.values.end());
    return grad_check(fn, params, 1e-6) < 1e-4;
  });

  h.check("adam reaches the quadratic optimum", [] {
    ParamSet ps;
    ps.add("w", TensorValue::scalar(1.0));
    Moments mo = moments_like(ps);
    AdamHyper hyper;
    hyper.beta1 = 0.9;
    for (int i = 0; i < 500; ++i) {
      std::vector<TensorValue> g{TensorValue::scalar(2.0 * ps.values[0].data[0])};
      optimizer_step(OptKind::adam, ps, g, mo, 0.1, hyper);
    }
    return std::abs(ps.values[0].data[0]) < 1e-3;
  });

  h.check("training is deterministic given the seed", [] {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::gaussian_sanity;
    spec.data_source = DataSource::synthetic_gaussian;
    spec.prior_source = PriorSource::gaussian;
    spec.data_dim = 1;
    spec.latent_dim = 1;
    spec.data_n = 200;
    spec.config.linear_maps = true;
    spec.config.steps = 20;
    spec.config.batch = 16;
    spec.config.ratio_hidden = {8};
    spec.config.log_interval = 5;
    Dataset data = build_dataset(spec);
    Prior prior = build_prior(spec);
    Models models = build_models(spec.config, 1, 1);
    auto r1 = train(spec.config, models, data.train, prior.bank, init_state(spec.config, models));
    auto r2 = train(spec.config, models, data.train, prior.bank, init_state(spec.config, models));
    if (r1.log.size() != r2.log.size() || r1.log.empty()) return false;
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
      if (r1.log[i].total != r2.log[i].total || r1.log[i].nell != r2.log[i].nell) return false;
    }
    return true;
  });

  return h.failures;
}

}  // namespace ilvm
