#include <doctest.h>

#include <cmath>

#include "ilvm/objectives.hpp"

using namespace ilvm;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Setup {
  Conditional lik;
  Conditional post;
  RatioNetSpec ratio_lat;
  RatioNetSpec ratio_obs;
  ParamSet theta, phi, alpha, beta;
  TensorValue x, z_prior, eps, xi;
  std::int64_t D = 3;
  std::int64_t K = 2;
  std::int64_t B = 16;
};

Setup make_setup(std::uint64_t seed, double tau = 0.5, double t = 0.3,
                 CondKind kind = CondKind::gaussian, bool perturb_ratio = true,
                 bool ignore_cond = false) {
  Setup s;
  s.lik = Conditional{kind, MlpSpec{s.K, {8}, s.D, Activation::tanh, rng_word(seed, 0, 1),
                                    false, false, false},
                      tau, false, s.D};
  s.post = Conditional{kind, MlpSpec{s.D, {8}, s.K, Activation::tanh, rng_word(seed, 0, 2),
                                     false, false, false},
                       t, false, s.K};
  s.ratio_lat = RatioNetSpec::make(s.K, s.D, {8}, Activation::tanh, rng_word(seed, 0, 3),
                                   ignore_cond);
  s.ratio_obs = RatioNetSpec::make(s.D, s.K, {8}, Activation::tanh, rng_word(seed, 0, 4),
                                   ignore_cond);
  s.theta = conditional_init(s.lik);
  s.phi = conditional_init(s.post);
  s.alpha = mlp_init(s.ratio_lat.net);
  s.beta = mlp_init(s.ratio_obs.net);
  RngStream rs(seed, 50);
  if (perturb_ratio) {
    for (auto name : {"w1", "b1"}) {
      for (auto& v : s.alpha.by_name(name).data) v = 0.6 * rs.next_normal();
      for (auto& v : s.beta.by_name(name).data) v = 0.6 * rs.next_normal();
    }
  }
  s.x = TensorValue({s.B, s.D}, rs.normal_vector(static_cast<std::size_t>(s.B * s.D)));
  s.z_prior = TensorValue({s.B, s.K}, rs.normal_vector(static_cast<std::size_t>(s.B * s.K)));
  s.eps = TensorValue({s.B, s.K}, kind == CondKind::gaussian
                                      ? rs.normal_vector(static_cast<std::size_t>(s.B * s.K))
                                      : rs.laplace_vector(static_cast<std::size_t>(s.B * s.K)));
  s.xi = TensorValue({s.B, s.D}, kind == CondKind::gaussian
                                     ? rs.normal_vector(static_cast<std::size_t>(s.B * s.D))
                                     : rs.laplace_vector(static_cast<std::size_t>(s.B * s.D)));
  return s;
}

// Identity-map conditionals in a shared dimension d (linear weights = I).
Setup identity_setup(std::int64_t d, double tau, double t) {
  Setup s;
  s.D = d;
  s.K = d;
  s.B = 8;
  auto ident = [&](double scale) {
    Conditional c;
    c.kind = CondKind::gaussian;
    c.mean_net = MlpSpec{d, {}, d, Activation::tanh, 0, true, false, false};
    c.scale = scale;
    c.dim = d;
    return c;
  };
  s.lik = ident(tau);
  s.post = ident(t);
  s.theta = conditional_init(s.lik);
  s.phi = conditional_init(s.post);
  for (auto* ps : {&s.theta, &s.phi}) {
    auto& w = ps->by_name("w0");
    for (auto& v : w.data) v = 0.0;
    for (std::int64_t i = 0; i < d; ++i) w.at(i, i) = 1.0;
  }
  s.ratio_lat = RatioNetSpec::make(d, d, {4}, Activation::tanh, 1, false);
  s.ratio_obs = RatioNetSpec::make(d, d, {4}, Activation::tanh, 2, false);
  s.alpha = mlp_init(s.ratio_lat.net);  // zero head: log r == 0
  s.beta = mlp_init(s.ratio_obs.net);
  RngStream rs(9, 51);
  s.x = TensorValue({s.B, d}, rs.normal_vector(static_cast<std::size_t>(s.B * d)));
  s.z_prior = TensorValue({s.B, d}, rs.normal_vector(static_cast<std::size_t>(s.B * d)));
  s.eps = TensorValue::zeros({s.B, d});
  s.xi = TensorValue::zeros({s.B, d});
  return s;
}

TensorValue antithetic(const TensorValue& half) {
  TensorValue out = vcat(half, half);
  for (std::size_t i = half.data.size(); i < out.data.size(); ++i) out.data[i] = -out.data[i];
  return out;
}

}  // namespace

TEST_CASE("nell closed forms") {
  SUBCASE("identity roundtrip with degenerate posterior: (D/2) log 2pi per point") {
    Setup s = identity_setup(3, 1.0, 0.0);
    const double v = nell(s.lik, s.theta, s.post, s.phi, s.x, s.eps);
    CHECK(v == doctest::Approx(1.5 * kLog2Pi).epsilon(1e-13));
  }
  SUBCASE("small-t limit reaches gamma * cycle + delta within 1e-3 * gamma") {
    Setup s = make_setup(5, 0.5, 1e-3);
    const TensorValue eps2 = antithetic(s.eps);
    const TensorValue x2 = vcat(s.x, s.x);
    const GammaDelta gd = degenerate_limit_constants(CondKind::gaussian, 0.5, s.D);
    const double cyc = cycle_loss(Direction::reverse, s.lik, s.theta, s.post, s.phi, s.x, 2);
    const double v = nell(s.lik, s.theta, s.post, s.phi, x2, eps2);
    CHECK(std::abs(v - (gd.gamma * cyc + gd.delta)) < 1e-3 * gd.gamma);
  }
  SUBCASE("scale-doubling difference matches the closed-form expansion to 1e-10") {
    Setup s = make_setup(6, 0.4, 0.3);
    const double v1 = nell(s.lik, s.theta, s.post, s.phi, s.x, s.eps);
    const double v2 = [&] {
      Setup s2 = s;
      s2.lik.scale = 0.8;
      return nell(s2.lik, s2.theta, s2.post, s2.phi, s2.x, s2.eps);
    }();
    // For a fixed batch, nell(tau) = R/(2 tau^2) + (D/2) log(2 pi tau^2):
    // nell(tau) - nell(2 tau) = 3R/(8 tau^2) - D log 2.
    const double tau = 0.4;
    const double r = (v1 - 0.5 * s.D * std::log(2 * M_PI * tau * tau)) * 2 * tau * tau;
    CHECK(std::abs((v1 - v2) - (3 * r / (8 * tau * tau) - s.D * std::log(2.0))) < 1e-10);
  }
}

TEST_CASE("nelp closed forms") {
  SUBCASE("identity roundtrip with degenerate likelihood: (K/2) log 2pi per point") {
    Setup s = identity_setup(2, 0.0, 1.0);
    const double v = nelp(s.lik, s.theta, s.post, s.phi, s.z_prior, s.xi);
    CHECK(v == doctest::Approx(1.0 * kLog2Pi).epsilon(1e-13));
  }
  SUBCASE("small-tau limit reaches gamma2 * cycle_forward + delta2") {
    Setup s = make_setup(7, 1e-3, 0.4);
    const TensorValue xi2 = antithetic(s.xi);
    const TensorValue z2 = vcat(s.z_prior, s.z_prior);
    const GammaDelta gd = degenerate_limit_constants(CondKind::gaussian, 0.4, s.K);
    const double cyc = cycle_loss(Direction::forward, s.lik, s.theta, s.post, s.phi, s.z_prior, 2);
    const double v = nelp(s.lik, s.theta, s.post, s.phi, z2, xi2);
    CHECK(std::abs(v - (gd.gamma * cyc + gd.delta)) < 1e-3 * gd.gamma);
  }
  SUBCASE("laplace conditionals reproduce the l1 analogue exactly at tau = 0") {
    Setup s = make_setup(8, 0.0, 0.5, CondKind::laplace);
    const GammaDelta gd = degenerate_limit_constants(CondKind::laplace, 0.5, s.K);
    const double cyc = cycle_loss(Direction::forward, s.lik, s.theta, s.post, s.phi, s.z_prior, 1);
    const double v = nelp(s.lik, s.theta, s.post, s.phi, s.z_prior, s.xi);
    CHECK(v == doctest::Approx(gd.gamma * cyc + gd.delta).epsilon(1e-12));
  }
}

TEST_CASE("kl dre delegates to the generalized bound") {
  Setup s = make_setup(9);
  const double a = kl_dre_latent(s.ratio_lat, s.alpha, s.post, s.phi, s.x, s.z_prior, s.eps);
  Graph g;
  auto post = bind_conditional(g, s.post, s.phi, true);
  Tensor xs = g.constant(s.x);
  Tensor z = rsample(g, post, xs, g.constant(s.eps));
  const double b = dre_bound_latent_term(g, kl_f(), net_log_ratio_of(s.ratio_lat, s.alpha), xs,
                                         z, g.constant(s.z_prior))
                       .val()
                       .scalar_value();
  CHECK(a == b);

  SUBCASE("zero-initialized ratio head gives 0") {
    Setup z0 = make_setup(10, 0.5, 0.3, CondKind::gaussian, /*perturb_ratio=*/false);
    CHECK(kl_dre_latent(z0.ratio_lat, z0.alpha, z0.post, z0.phi, z0.x, z0.z_prior, z0.eps) ==
          doctest::Approx(0.0).epsilon(1e-14));
    CHECK(kl_dre_observed(z0.ratio_obs, z0.beta, z0.lik, z0.theta, z0.z_prior, z0.xi, z0.x) ==
          doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("kl dm losses") {
  SUBCASE("log r == 0 gives 0; constant head gives the constant") {
    Setup s = make_setup(11, 0.5, 0.3, CondKind::gaussian, false);
    CHECK(kl_dm_latent(s.post, s.phi, s.ratio_lat, s.alpha, s.x, s.eps) == 0.0);
    CHECK(kl_dm_observed(s.lik, s.theta, s.ratio_obs, s.beta, s.z_prior, s.xi) == 0.0);
    s.alpha.by_name("b1").data[0] = 1.37;
    CHECK(kl_dm_latent(s.post, s.phi, s.ratio_lat, s.alpha, s.x, s.eps) ==
          doctest::Approx(1.37).epsilon(1e-15));
  }
  SUBCASE("analytic ratio net estimates KL(N(m,1) || N(0,1)) = m^2/2") {
    const double m = 0.8;
    Conditional post;
    post.kind = CondKind::gaussian;
    post.mean_net = MlpSpec{1, {}, 1, Activation::tanh, 0, true, false, false};
    post.scale = 1.0;
    post.dim = 1;
    ParamSet phi = conditional_init(post);
    phi.by_name("w0").data[0] = 0.0;
    phi.by_name("b0").data[0] = m;

    RatioNetSpec ratio = RatioNetSpec::make(1, 1, {}, Activation::tanh, 0, true);
    ParamSet alpha = mlp_init(ratio.net);
    alpha.by_name("w0").data[0] = m;
    alpha.by_name("b0").data[0] = -m * m / 2;

    RngStream rs(77, 52);
    const std::int64_t n = 100000;
    TensorValue x = TensorValue::zeros({n, 1});
    TensorValue eps({n, 1}, rs.normal_vector(static_cast<std::size_t>(n)));
    const double est = kl_dm_latent(post, phi, ratio, alpha, x, eps);
    CHECK(std::abs(est - m * m / 2) < 0.02);
  }
}

TEST_CASE("gan objective and dm variants at the neutral point") {
  Setup s = make_setup(12, 0.5, 0.3, CondKind::gaussian, false);
  CHECK(gan_objective(Direction::reverse, GanMode::stochastic, s.post, s.phi, s.ratio_lat,
                      s.alpha, s.x, s.z_prior, s.eps) ==
        doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  CHECK(gan_objective(Direction::forward, GanMode::stochastic, s.lik, s.theta, s.ratio_obs,
                      s.beta, s.x, s.z_prior, s.xi) ==
        doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  CHECK(dm_loss(DmVariant::a, Direction::reverse, s.post, s.phi, s.ratio_lat, s.alpha, s.x,
                s.eps) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(dm_loss(DmVariant::b, Direction::reverse, s.post, s.phi, s.ratio_lat, s.alpha, s.x,
                s.eps) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(dm_loss(DmVariant::c, Direction::reverse, s.post, s.phi, s.ratio_lat, s.alpha, s.x,
                s.eps) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("exact loss identities over random nets and batches") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Setup s = make_setup(100 + seed);
    // dm variant c == the KL minimization loss
    const double c = dm_loss(DmVariant::c, Direction::reverse, s.post, s.phi, s.ratio_lat,
                             s.alpha, s.x, s.eps);
    const double kl = kl_dm_latent(s.post, s.phi, s.ratio_lat, s.alpha, s.x, s.eps);
    CHECK(std::abs(c - kl) <= 1e-12);

    // constant-head sanity: C equals the constant (checked once per seed)
    // gan objective == generalized bound with f_gan on shared batches
    const double gan = gan_objective(Direction::reverse, GanMode::stochastic, s.post, s.phi,
                                     s.ratio_lat, s.alpha, s.x, s.z_prior, s.eps);
    Graph g;
    auto post = bind_conditional(g, s.post, s.phi, true);
    Tensor xs = g.constant(s.x);
    Tensor z = rsample(g, post, xs, g.constant(s.eps));
    const double bound = dre_bound_latent_term(g, gan_f(),
                                               net_log_ratio_of(s.ratio_lat, s.alpha), xs, z,
                                               g.constant(s.z_prior))
                             .val()
                             .scalar_value();
    CHECK(std::abs(gan - bound) <= 1e-12);

    // lagrangian form at lambda = 1 == the KL bound
    const double kliep =
        kliep_objective(s.ratio_lat, s.alpha, s.post, s.phi, s.x, s.z_prior, s.eps, 1.0);
    const double dre =
        kl_dre_latent(s.ratio_lat, s.alpha, s.post, s.phi, s.x, s.z_prior, s.eps);
    CHECK(std::abs(kliep - dre) <= 1e-12);
  }
}

TEST_CASE("kliep corner cases") {
  Setup s = make_setup(13);
  SUBCASE("lambda 0 with a constant head returns the constant") {
    Setup z0 = make_setup(14, 0.5, 0.3, CondKind::gaussian, false);
    z0.alpha.by_name("b1").data[0] = -0.55;
    CHECK(kliep_objective(z0.ratio_lat, z0.alpha, z0.post, z0.phi, z0.x, z0.z_prior, z0.eps,
                          0.0) == doctest::Approx(-0.55).epsilon(1e-15));
  }
  SUBCASE("log r == 0 gives 0 for any lambda") {
    Setup z0 = make_setup(15, 0.5, 0.3, CondKind::gaussian, false);
    for (double lambda : {0.0, 0.7, 1.0, 3.0}) {
      CHECK(kliep_objective(z0.ratio_lat, z0.alpha, z0.post, z0.phi, z0.x, z0.z_prior, z0.eps,
                            lambda) == doctest::Approx(0.0).epsilon(1e-14));
    }
  }
  SUBCASE("negative lambda is rejected") {
    CHECK_THROWS_AS(kliep_objective(s.ratio_lat, s.alpha, s.post, s.phi, s.x, s.z_prior, s.eps,
                                    -0.1),
                    ContractError);
  }
}

TEST_CASE("cycle losses") {
  SUBCASE("identity maps reconstruct exactly") {
    Setup s = identity_setup(3, 1.0, 1.0);
    CHECK(cycle_loss(Direction::reverse, s.lik, s.theta, s.post, s.phi, s.x, 2) == 0.0);
    CHECK(cycle_loss(Direction::forward, s.lik, s.theta, s.post, s.phi, s.z_prior, 1) == 0.0);
  }
  SUBCASE("constant offset c gives ||c||^2 under rho = 2") {
    Setup s = identity_setup(3, 1.0, 1.0);
    s.theta.by_name("b0").data = {0.3, -0.4, 1.2};
    const double expected = 0.3 * 0.3 + 0.4 * 0.4 + 1.2 * 1.2;
    CHECK(cycle_loss(Direction::reverse, s.lik, s.theta, s.post, s.phi, s.x, 2) ==
          doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("laplace degenerate limit is gamma * cycle_rho1 + delta exactly") {
    Setup s = make_setup(16, 0.35, 0.0, CondKind::laplace);
    const GammaDelta gd = degenerate_limit_constants(CondKind::laplace, 0.35, s.D);
    const double cyc = cycle_loss(Direction::reverse, s.lik, s.theta, s.post, s.phi, s.x, 1);
    const double v = nell(s.lik, s.theta, s.post, s.phi, s.x, s.eps);
    CHECK(v == doctest::Approx(gd.gamma * cyc + gd.delta).epsilon(1e-12));
  }
  SUBCASE("unsupported norm order is rejected") {
    Setup s = identity_setup(2, 1.0, 1.0);
    CHECK_THROWS_AS(cycle_loss(Direction::reverse, s.lik, s.theta, s.post, s.phi, s.x, 3),
                    ContractError);
  }
}

TEST_CASE("symmetric joint report") {
  SUBCASE("identity maps, unit ratios, zero noise: (D+K)/2 log 2pi") {
    Setup s = identity_setup(2, 1.0, 1.0);
    ObjectiveReport r =
        symmetric_joint_report(s.lik, s.theta, s.post, s.phi, s.ratio_lat, s.alpha, s.ratio_obs,
                               s.beta, s.x, s.z_prior, s.eps, s.xi);
    CHECK(r.value == doctest::Approx(2.0 * kLog2Pi).epsilon(1e-13));
    CHECK(r.sub("kl_dm_latent") == 0.0);
    CHECK(r.sub("kl_dm_observed") == 0.0);
  }
  SUBCASE("sub-terms sum to the total") {
    Setup s = make_setup(17);
    ObjectiveReport r =
        symmetric_joint_report(s.lik, s.theta, s.post, s.phi, s.ratio_lat, s.alpha, s.ratio_obs,
                               s.beta, s.x, s.z_prior, s.eps, s.xi);
    const double sum = r.sub("nell") + r.sub("kl_dm_latent") + r.sub("nelp") +
                       r.sub("kl_dm_observed");
    CHECK(std::abs(r.value - sum) <= 1e-12);
    CHECK(r.batch_data == s.B);
    CHECK(r.reverse_limit.gamma == doctest::Approx(1.0 / (2 * 0.5 * 0.5)));
  }
  SUBCASE("report is invariant to batch permutation") {
    Setup s = make_setup(18);
    ObjectiveReport r1 =
        symmetric_joint_report(s.lik, s.theta, s.post, s.phi, s.ratio_lat, s.alpha, s.ratio_obs,
                               s.beta, s.x, s.z_prior, s.eps, s.xi);
    // reverse the rows of (x, eps) jointly and (z, xi) jointly
    auto reverse_rows = [](const TensorValue& m) {
      TensorValue out = m;
      for (std::int64_t i = 0; i < m.rows(); ++i) {
        for (std::int64_t j = 0; j < m.cols(); ++j) out.at(i, j) = m.at(m.rows() - 1 - i, j);
      }
      return out;
    };
    ObjectiveReport r2 = symmetric_joint_report(
        s.lik, s.theta, s.post, s.phi, s.ratio_lat, s.alpha, s.ratio_obs, s.beta,
        reverse_rows(s.x), reverse_rows(s.z_prior), reverse_rows(s.eps), reverse_rows(s.xi));
    CHECK(r1.value == doctest::Approx(r2.value).epsilon(1e-12));
  }
}

TEST_CASE("frozen-parameter contract") {
  Setup s = make_setup(19);
  SUBCASE("dm loss passes no gradient into the ratio parameters") {
    Graph g;
    auto post = bind_conditional(g, s.post, s.phi, false);
    auto alpha = bind(g, s.alpha, true);
    Tensor root = kl_dm_latent_term(g, post, s.ratio_lat, alpha, g.constant(s.x),
                                    g.constant(s.eps));
    auto gm = g.backward(root);
    auto a_grads = extract_grads(alpha, gm);
    for (const auto& t : a_grads) {
      for (double v : t.data) CHECK(v == 0.0);
    }
    auto phi_grads = extract_grads(post.params, gm);
    double norm = 0;
    for (const auto& t : phi_grads) {
      for (double v : t.data) norm += v * v;
    }
    CHECK(norm > 0.0);
  }
  SUBCASE("dre objective passes no gradient into the posterior parameters") {
    Graph g;
    auto post = bind_conditional(g, s.post, s.phi, true);
    auto alpha = bind(g, s.alpha, false);
    Tensor xs = g.constant(s.x);
    Tensor z = rsample(g, post, xs, g.constant(s.eps));
    Tensor root = dre_bound_latent_term(g, gan_f(), net_log_ratio(s.ratio_lat, alpha), xs, z,
                                        g.constant(s.z_prior));
    auto gm = g.backward(root);
    auto phi_grads = extract_grads(post.params, gm);
    for (const auto& t : phi_grads) {
      for (double v : t.data) CHECK(v == 0.0);
    }
    auto a_grads = extract_grads(alpha, gm);
    double norm = 0;
    for (const auto& t : a_grads) {
      for (double v : t.data) norm += v * v;
    }
    CHECK(norm > 0.0);
  }
}

TEST_CASE("objective gradients pass finite-difference checks") {
  Setup s = make_setup(20);

  auto check_fn = [&](const ScalarFn& fn, const std::vector<TensorValue>& params) {
    CHECK(grad_check(fn, params, 1e-6) < 1e-4);
  };

  SUBCASE("nell wrt theta and phi") {
    std::vector<TensorValue> params = s.theta.values;
    params.insert(params.end(), s.phi.values.begin(), s.phi.values.end());
    check_fn(
        [&](Graph& g, const std::vector<Tensor>& p) {
          BoundConditional lik{&s.lik,
                               BoundParams{&s.theta,
                                           {p.begin(), p.begin() + s.theta.size()}, false}};
          BoundConditional post{&s.post,
                                BoundParams{&s.phi, {p.begin() + s.theta.size(), p.end()},
                                            false}};
          return nell_term(g, lik, post, g.constant(s.x), g.constant(s.eps));
        },
        params);
  }
  SUBCASE("kl_dm_latent wrt phi (through the reparameterized samples)") {
    check_fn(
        [&](Graph& g, const std::vector<Tensor>& p) {
          BoundConditional post{&s.post, BoundParams{&s.phi, p, false}};
          auto alpha = bind(g, s.alpha, true);
          return kl_dm_latent_term(g, post, s.ratio_lat, alpha, g.constant(s.x),
                                   g.constant(s.eps));
        },
        s.phi.values);
  }
  SUBCASE("gan dre objective wrt alpha") {
    check_fn(
        [&](Graph& g, const std::vector<Tensor>& p) {
          BoundConditional post{&s.post, bind(g, s.phi, true)};
          BoundParams alpha{&s.alpha, p, false};
          Tensor xs = g.constant(s.x);
          Tensor z = rsample(g, post, xs, g.constant(s.eps));
          return dre_bound_latent_term(g, gan_f(), net_log_ratio(s.ratio_lat, alpha), xs, z,
                                       g.constant(s.z_prior));
        },
        s.alpha.values);
  }
  SUBCASE("cycle loss wrt theta and phi") {
    std::vector<TensorValue> params = s.theta.values;
    params.insert(params.end(), s.phi.values.begin(), s.phi.values.end());
    check_fn(
        [&](Graph& g, const std::vector<Tensor>& p) {
          BoundConditional lik{&s.lik,
                               BoundParams{&s.theta,
                                           {p.begin(), p.begin() + s.theta.size()}, false}};
          BoundConditional post{&s.post,
                                BoundParams{&s.phi, {p.begin() + s.theta.size(), p.end()},
                                            false}};
          return cycle_loss_term(g, Direction::reverse, lik, post, g.constant(s.x), 2);
        },
        params);
  }
}

TEST_CASE("learned scales carry gradients") {
  Setup s = make_setup(21);
  s.lik.learn_scale = true;
  s.post.learn_scale = true;
  ParamSet theta = conditional_init(s.lik);
  ParamSet phi = conditional_init(s.post);
  REQUIRE(theta.has("log_scale"));

  std::vector<TensorValue> params = theta.values;
  params.insert(params.end(), phi.values.begin(), phi.values.end());
  const double err = grad_check(
      [&](Graph& g, const std::vector<Tensor>& p) {
        BoundConditional lik{&s.lik,
                             BoundParams{&theta, {p.begin(), p.begin() + theta.size()}, false}};
        BoundConditional post{&s.post,
                              BoundParams{&phi, {p.begin() + theta.size(), p.end()}, false}};
        return nell_term(g, lik, post, g.constant(s.x), g.constant(s.eps));
      },
      params, 1e-6);
  CHECK(err < 1e-4);
}
