#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ilvm/experiment.hpp"
#include "ilvm/trainer.hpp"

using namespace ilvm;

namespace {

SampleBank normal_bank(std::int64_t n, std::int64_t d, std::uint64_t seed) {
  RngStream rng(seed, 61);
  return make_bank(TensorValue({n, d}, rng.normal_vector(static_cast<std::size_t>(n * d))),
                   seed);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.batch = 8;
  cfg.map_hidden = {8};
  cfg.ratio_hidden = {8};
  cfg.log_interval = 5;
  return cfg;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i].data != b.values[i].data) return false;
  }
  return true;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("optimizer steps") {
  SUBCASE("sgd with zero gradient leaves parameters unchanged") {
    ParamSet ps;
    ps.add("w", TensorValue::vector({1.0, -2.0}));
    Moments mo = moments_like(ps);
    optimizer_step(OptKind::sgd, ps, {TensorValue::zeros({2})}, mo, 0.4, {});
    CHECK(ps.values[0].data == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("sgd on f(w) = w^2 from 1 with lr 0.4 lands on 0.2") {
    ParamSet ps;
    ps.add("w", TensorValue::scalar(1.0));
    Moments mo = moments_like(ps);
    optimizer_step(OptKind::sgd, ps, {TensorValue::scalar(2.0)}, mo, 0.4, {});
    CHECK(ps.values[0].data[0] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("adam matches an independent scalar transcription and converges") {
    AdamHyper hyper;
    hyper.beta1 = 0.9;
    ParamSet ps;
    ps.add("w", TensorValue::scalar(1.0));
    Moments mo = moments_like(ps);

    double w = 1.0;
    double m = 0;
    double v = 0;
    bool trajectory_matches = true;
    for (int step = 1; step <= 500; ++step) {
      const double g = 2.0 * ps.values[0].data[0];
      optimizer_step(OptKind::adam, ps, {TensorValue::scalar(g)}, mo, 0.1, hyper);
      const double g2 = 2.0 * w;
      m = hyper.beta1 * m + (1 - hyper.beta1) * g2;
      v = hyper.beta2 * v + (1 - hyper.beta2) * g2 * g2;
      const double mhat = m / (1 - std::pow(hyper.beta1, step));
      const double vhat = v / (1 - std::pow(hyper.beta2, step));
      w -= 0.1 * mhat / (std::sqrt(vhat) + hyper.eps);
      if (w != ps.values[0].data[0]) trajectory_matches = false;
    }
    CHECK(trajectory_matches);
    CHECK(std::abs(ps.values[0].data[0]) < 1e-3);
  }
  SUBCASE("gradient shape mismatch is rejected") {
    ParamSet ps;
    ps.add("w", TensorValue::vector({1.0, 2.0}));
    Moments mo = moments_like(ps);
    CHECK_THROWS_AS(optimizer_step(OptKind::sgd, ps, {TensorValue::scalar(0.0)}, mo, 0.1, {}),
                    ShapeError);
  }
}

TEST_CASE("zero steps return the initial state unchanged") {
  TrainConfig cfg = small_config();
  cfg.steps = 0;
  SampleBank data = normal_bank(32, 2, 1);
  SampleBank prior = normal_bank(32, 1, 2);
  Models models = build_models(cfg, 2, 1);
  TrainState init = init_state(cfg, models);
  TrainResult r = train(cfg, models, data, prior, init);
  CHECK(r.log.empty());
  CHECK(r.state.step == 0);
  CHECK(same_params(r.state.theta, init.theta));
  CHECK(same_params(r.state.phi, init.phi));
  CHECK(same_params(r.state.alpha, init.alpha));
}

TEST_CASE("role separation: each update touches only its own parameter sets") {
  SampleBank data = normal_bank(64, 2, 3);
  SampleBank prior = normal_bank(64, 1, 4);
  TrainConfig cfg = small_config();
  cfg.ratio_steps = 3;
  Models models = build_models(cfg, 2, 1);
  TrainState state = init_state(cfg, models);
  TrainState before = state;

  RatioMetrics rm = ratio_updates(cfg, models, data, prior, state);
  CHECK(std::isfinite(rm.dre_latent));
  CHECK(same_params(state.theta, before.theta));
  CHECK(same_params(state.phi, before.phi));
  CHECK_FALSE(same_params(state.alpha, before.alpha));
  CHECK_FALSE(same_params(state.beta, before.beta));

  TrainState mid = state;
  MetricRow row = model_update(cfg, models, data, prior, state, nullptr, 1);
  CHECK(std::isfinite(row.total));
  CHECK(same_params(state.alpha, mid.alpha));
  CHECK(same_params(state.beta, mid.beta));
  CHECK_FALSE(same_params(state.theta, mid.theta));
  CHECK_FALSE(same_params(state.phi, mid.phi));
}

TEST_CASE("vae baseline trains no ratio nets and uses the analytic prior") {
  TrainConfig cfg = small_config();
  cfg.mode = Mode::vae_baseline;
  cfg.steps = 20;
  SampleBank prior = banana_sample(256, 0.95, 5);
  SampleBank data = normal_bank(64, 3, 6);
  Models models = build_models(cfg, 3, 2);
  TrainState init = init_state(cfg, models);
  PriorLogDensityFn density = [](Graph& g, Tensor z) { return banana_log_density(g, z, 0.95); };
  TrainResult r = train(cfg, models, data, prior, init, density);
  CHECK(same_params(r.state.alpha, init.alpha));
  CHECK(same_params(r.state.beta, init.beta));
  CHECK_FALSE(same_params(r.state.phi, init.phi));
  REQUIRE_FALSE(r.log.empty());
  CHECK(r.log.back().dre_latent == 0.0);
  CHECK(r.log.back().dm_latent != 0.0);  // analytic KL estimate

  SUBCASE("missing density is a contract error") {
    CHECK_THROWS_AS(train(cfg, models, data, prior, init_state(cfg, models)), ContractError);
  }
}

TEST_CASE("sjmvi on the 1d linear-gaussian problem reaches low reconstruction error") {
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch = 64;
  cfg.linear_maps = true;
  cfg.ratio_hidden = {16};
  cfg.lr_model = 2e-3;
  cfg.lr_ratio = 1e-3;
  cfg.log_interval = 500;
  SampleBank data = normal_bank(4000, 1, 7);
  SampleBank prior = normal_bank(4000, 1, 8);
  Models models = build_models(cfg, 1, 1);
  TrainResult r = train(cfg, models, data, prior, init_state(cfg, models));

  SampleBank test = normal_bank(1000, 1, 9);
  SampleBank prior_eval = normal_bank(1000, 1, 10);
  EvalResult ev = evaluate(models, r.state, test, prior_eval);
  CHECK(ev.mse_x < 0.05);
  CHECK(ev.mse_z < 0.05);
}

TEST_CASE("mode equivalence: cyclegan gradients match the sjmvi degenerate limit") {
  const double tau0 = 0.4;
  const double t0 = 0.3;
  const std::int64_t D = 3;
  const std::int64_t K = 2;
  const std::int64_t B = 16;

  Conditional lik_det{CondKind::gaussian,
                      MlpSpec{K, {8}, D, Activation::tanh, 1001, false, false, false}, 0.0,
                      false, D};
  Conditional lik_tau = lik_det;
  lik_tau.scale = tau0;
  Conditional post_det{CondKind::gaussian,
                       MlpSpec{D, {8}, K, Activation::tanh, 1002, false, false, false}, 0.0,
                       false, K};
  Conditional post_t = post_det;
  post_t.scale = t0;

  ParamSet theta = conditional_init(lik_det);
  ParamSet phi = conditional_init(post_det);
  RatioNetSpec ratio_lat = RatioNetSpec::make(K, D, {8}, Activation::tanh, 1003, true);
  RatioNetSpec ratio_obs = RatioNetSpec::make(D, K, {8}, Activation::tanh, 1004, true);
  ParamSet alpha = mlp_init(ratio_lat.net);
  ParamSet beta = mlp_init(ratio_obs.net);
  RngStream rs(1005, 62);
  for (auto name : {"w1", "b1"}) {
    for (auto& v : alpha.by_name(name).data) v = 0.5 * rs.next_normal();
    for (auto& v : beta.by_name(name).data) v = 0.5 * rs.next_normal();
  }
  TensorValue x({B, D}, rs.normal_vector(static_cast<std::size_t>(B * D)));
  TensorValue z({B, K}, rs.normal_vector(static_cast<std::size_t>(B * K)));
  TensorValue eps({B, K}, rs.normal_vector(static_cast<std::size_t>(B * K)));
  TensorValue xi({B, D}, rs.normal_vector(static_cast<std::size_t>(B * D)));

  const double gamma1 = 1.0 / (2 * tau0 * tau0);
  const double gamma2 = 1.0 / (2 * t0 * t0);

  auto grads_of = [&](bool cyclegan_form) {
    Graph g;
    auto bl_det = bind_conditional(g, lik_det, theta, false);
    auto bp_det = bind_conditional(g, post_det, phi, false);
    // same underlying parameter leaves for the scale variants
    BoundConditional bl_tau{&lik_tau, bl_det.params};
    BoundConditional bp_t{&post_t, bp_det.params};
    auto ba = bind(g, alpha, true);
    auto bb = bind(g, beta, true);
    Tensor xs = g.constant(x);
    Tensor zs = g.constant(z);
    Tensor es = g.constant(eps);
    Tensor ns = g.constant(xi);

    Tensor root;
    if (cyclegan_form) {
      Tensor dm_rev = dm_loss_term(g, DmVariant::c, Direction::reverse, bp_det, ratio_lat, ba,
                                   xs, es, GanMode::deterministic);
      Tensor dm_fwd = dm_loss_term(g, DmVariant::c, Direction::forward, bl_det, ratio_obs, bb,
                                   zs, ns, GanMode::deterministic);
      Tensor cyc_rev = cycle_loss_term(g, Direction::reverse, bl_det, bp_det, xs, 2);
      Tensor cyc_fwd = cycle_loss_term(g, Direction::forward, bl_det, bp_det, zs, 2);
      root = add(add(dm_rev, dm_fwd),
                 add(mul_scalar(cyc_rev, gamma1), mul_scalar(cyc_fwd, gamma2)));
    } else {
      Tensor dm_lat = kl_dm_latent_term(g, bp_det, ratio_lat, ba, xs, es);
      Tensor dm_obs = kl_dm_observed_term(g, bl_det, ratio_obs, bb, zs, ns);
      Tensor v_nell = nell_term(g, bl_tau, bp_det, xs, es);
      Tensor v_nelp = nelp_term(g, bl_det, bp_t, zs, ns);
      root = add(add(dm_lat, dm_obs), add(v_nell, v_nelp));
    }
    auto gm = g.backward(root);
    auto gt = extract_grads(bl_det.params, gm);
    auto gp = extract_grads(bp_det.params, gm);
    gt.insert(gt.end(), gp.begin(), gp.end());
    return gt;
  };

  auto lhs = grads_of(true);
  auto rhs = grads_of(false);
  REQUIRE(lhs.size() == rhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    for (std::size_t j = 0; j < lhs[i].data.size(); ++j) {
      const double a = lhs[i].data[j];
      const double b = rhs[i].data[j];
      CHECK(std::abs(a - b) <= 1e-6 * std::max({1.0, std::abs(a), std::abs(b)}));
    }
  }
}

TEST_CASE("metric logs are deterministic and serialize identically") {
  TrainConfig cfg = small_config();
  cfg.steps = 20;
  SampleBank data = normal_bank(64, 2, 11);
  SampleBank prior = normal_bank(64, 1, 12);
  Models models = build_models(cfg, 2, 1);
  TrainResult r1 = train(cfg, models, data, prior, init_state(cfg, models));
  TrainResult r2 = train(cfg, models, data, prior, init_state(cfg, models));
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].total == r2.log[i].total);
    CHECK(r1.log[i].dre_latent == r2.log[i].dre_latent);
  }
  write_metrics_csv("tmp_metrics_a.csv", r1.log);
  write_metrics_csv("tmp_metrics_b.csv", r2.log);
  CHECK(file_bytes("tmp_metrics_a.csv") == file_bytes("tmp_metrics_b.csv"));
  std::remove("tmp_metrics_a.csv");
  std::remove("tmp_metrics_b.csv");
}

TEST_CASE("checkpointing") {
  TrainConfig cfg = small_config();
  cfg.steps = 12;
  cfg.log_interval = 2;
  SampleBank data = normal_bank(64, 2, 13);
  SampleBank prior = normal_bank(64, 1, 14);
  Models models = build_models(cfg, 2, 1);
  TrainResult r = train(cfg, models, data, prior, init_state(cfg, models));

  SUBCASE("save -> load -> save produces identical bytes") {
    checkpoint_save(r.state, cfg, models, "tmp_ckpt_a.json");
    TrainState loaded = checkpoint_load("tmp_ckpt_a.json", cfg, models);
    checkpoint_save(loaded, cfg, models, "tmp_ckpt_b.json");
    CHECK(file_bytes("tmp_ckpt_a.json") == file_bytes("tmp_ckpt_b.json"));
    std::remove("tmp_ckpt_a.json");
    std::remove("tmp_ckpt_b.json");
  }
  SUBCASE("truncated file is a corrupt-checkpoint error") {
    checkpoint_save(r.state, cfg, models, "tmp_ckpt_t.json");
    std::string bytes = file_bytes("tmp_ckpt_t.json");
    std::ofstream out("tmp_ckpt_t.json", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(checkpoint_load("tmp_ckpt_t.json", cfg, models), IoError);
    std::remove("tmp_ckpt_t.json");
  }
  SUBCASE("fingerprint mismatch is rejected") {
    checkpoint_save(r.state, cfg, models, "tmp_ckpt_f.json");
    TrainConfig other = cfg;
    other.map_hidden = {6};
    Models other_models = build_models(other, 2, 1);
    CHECK_THROWS_AS(checkpoint_load("tmp_ckpt_f.json", other, other_models), IoError);
    std::remove("tmp_ckpt_f.json");
  }
  SUBCASE("resume reproduces the uninterrupted run exactly") {
    TrainConfig cfg200 = cfg;
    cfg200.steps = 20;
    TrainResult full = train(cfg200, models, data, prior, init_state(cfg200, models));

    TrainConfig cfg100 = cfg;
    cfg100.steps = 10;
    TrainResult first = train(cfg100, models, data, prior, init_state(cfg100, models));
    checkpoint_save(first.state, cfg100, models, "tmp_ckpt_r.json");
    TrainState resumed = checkpoint_load("tmp_ckpt_r.json", cfg100, models);
    TrainResult second = train(cfg100, models, data, prior, std::move(resumed));
    std::remove("tmp_ckpt_r.json");

    std::vector<MetricRow> stitched = first.log;
    stitched.insert(stitched.end(), second.log.begin(), second.log.end());
    REQUIRE(stitched.size() == full.log.size());
    for (std::size_t i = 0; i < stitched.size(); ++i) {
      CHECK(stitched[i].step == full.log[i].step);
      CHECK(stitched[i].nell == full.log[i].nell);
      CHECK(stitched[i].nelp == full.log[i].nelp);
      CHECK(stitched[i].dre_latent == full.log[i].dre_latent);
      CHECK(stitched[i].dre_observed == full.log[i].dre_observed);
      CHECK(stitched[i].dm_latent == full.log[i].dm_latent);
      CHECK(stitched[i].dm_observed == full.log[i].dm_observed);
      CHECK(stitched[i].total == full.log[i].total);
    }
    CHECK(same_params(second.state.theta, full.state.theta));
    CHECK(same_params(second.state.phi, full.state.phi));
    CHECK(same_params(second.state.alpha, full.state.alpha));
    CHECK(same_params(second.state.beta, full.state.beta));
  }
}

TEST_CASE("cyclegan mode trains with degenerate scales") {
  TrainConfig cfg = small_config();
  cfg.mode = Mode::cyclegan;
  cfg.tau = 0.0;
  cfg.t = 0.0;
  cfg.steps = 30;
  cfg.cycle_weight = 2.0;
  SampleBank data = normal_bank(128, 3, 21);
  SampleBank prior = normal_bank(128, 2, 22);
  Models models = build_models(cfg, 3, 2);
  CHECK(models.ratio_latent.ignore_conditioning);
  TrainResult r = train(cfg, models, data, prior, init_state(cfg, models));
  REQUIRE_FALSE(r.log.empty());
  // reconstruction losses occupy the nell/nelp columns in this mode
  CHECK(r.log.back().nell >= 0.0);
  CHECK(r.log.back().nelp >= 0.0);
  CHECK(std::isfinite(r.log.back().total));
  CHECK(r.log.back().nell < r.log.front().nell);  // reconstructions improve
}

TEST_CASE("learned scales move during training") {
  TrainConfig cfg = small_config();
  cfg.learn_scales = true;
  cfg.tau = 0.5;
  cfg.t = 0.5;
  cfg.steps = 30;
  SampleBank data = normal_bank(128, 2, 23);
  SampleBank prior = normal_bank(128, 1, 24);
  Models models = build_models(cfg, 2, 1);
  TrainState init = init_state(cfg, models);
  REQUIRE(init.theta.has("log_scale"));
  CHECK(init.theta.by_name("log_scale").data[0] == doctest::Approx(std::log(0.5)));
  TrainResult r = train(cfg, models, data, prior, init);
  CHECK(r.state.theta.by_name("log_scale").data[0] !=
        init.theta.by_name("log_scale").data[0]);
  CHECK(r.state.phi.by_name("log_scale").data[0] != init.phi.by_name("log_scale").data[0]);
}

TEST_CASE("non-finite losses abort with the step number") {
  TrainConfig cfg = small_config();
  cfg.steps = 50;
  cfg.optimizer = OptKind::sgd;
  cfg.linear_maps = true;
  cfg.lr_model = 1e18;  // guaranteed blow-up
  SampleBank data = normal_bank(64, 2, 15);
  SampleBank prior = normal_bank(64, 1, 16);
  Models models = build_models(cfg, 2, 1);
  try {
    train(cfg, models, data, prior, init_state(cfg, models));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step ") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg = small_config();
  cfg.t = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);  // zero scale outside cyclegan
  cfg.mode = Mode::cyclegan;
  cfg.tau = 0.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.ratio_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}
