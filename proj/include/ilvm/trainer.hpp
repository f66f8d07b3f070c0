#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilvm/distributions.hpp"
#include "ilvm/objectives.hpp"
#include "ilvm/optimizer.hpp"

namespace ilvm {

enum class Mode { sjmvi, cyclegan, vae_baseline };
enum class DreForm { gan, kl };

Mode mode_from_string(const std::string& s);
const char* mode_name(Mode m);
DreForm dre_form_from_string(const std::string& s);
const char* dre_form_name(DreForm f);

struct TrainConfig {
  Mode mode = Mode::sjmvi;
  DmVariant dm_variant = DmVariant::c;
  DreForm dre_form = DreForm::gan;
  std::int64_t steps = 20000;
  std::int64_t batch = 64;
  double lr_model = 1e-3;
  double lr_ratio = 2e-4;
  OptKind optimizer = OptKind::adam;
  AdamHyper adam;
  std::int64_t ratio_steps = 1;  // k ratio-ascent updates per model update
  std::int64_t noise_samples = 1;  // reparameterization draws per data point
  CondKind cond_kind = CondKind::gaussian;
  double tau = 0.1;  // likelihood scale (0 allowed in cyclegan mode)
  double t = 0.1;    // posterior scale
  bool learn_scales = false;
  int rho = 2;  // cycle-loss norm order
  std::uint64_t seed = 0;
  double weight_elbo = 1.0;
  double weight_aplbo = 1.0;
  double cycle_weight = 1.0;  // cyclegan mode only
  std::vector<std::int64_t> map_hidden = {256, 256};
  Activation map_act = Activation::tanh;
  std::vector<std::int64_t> ratio_hidden = {128, 128};
  Activation ratio_act = Activation::relu;
  bool linear_maps = false;
  std::int64_t log_interval = 100;

  void validate() const;
};

// Network structure derived from the config and the bank dimensions. Pure
// description; all numbers live in TrainState.
struct Models {
  Conditional likelihood;   // theta: mean net K -> D, scale tau
  Conditional posterior;    // phi:   mean net D -> K, scale t
  RatioNetSpec ratio_latent;    // alpha: log r(z; x)
  RatioNetSpec ratio_observed;  // beta:  log r(x; z)
  std::int64_t data_dim = 0;
  std::int64_t latent_dim = 0;
};

Models build_models(const TrainConfig& cfg, std::int64_t data_dim, std::int64_t latent_dim);

struct StreamCursors {
  std::uint64_t data = 0;
  std::uint64_t prior = 0;
  std::uint64_t eps = 0;
  std::uint64_t xi = 0;
};

struct TrainState {
  ParamSet theta, phi, alpha, beta;
  Moments m_theta, m_phi, m_alpha, m_beta;
  std::int64_t step = 0;
  StreamCursors cursors;
};

TrainState init_state(const TrainConfig& cfg, const Models& models);

struct MetricRow {
  std::int64_t step = 0;
  double nell = 0;
  double nelp = 0;
  double dre_latent = 0;
  double dre_observed = 0;
  double dm_latent = 0;
  double dm_observed = 0;
  double total = 0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

struct TrainResult {
  TrainState state;
  std::vector<MetricRow> log;
};

struct RatioMetrics {
  double dre_latent = 0;
  double dre_observed = 0;
};

// One block of ratio-ascent updates (ratio_steps alpha/beta sub-updates).
// Mutates only the ratio parameter sets, their moments and the stream
// cursors; theta and phi are read-only here.
RatioMetrics ratio_updates(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                           const SampleBank& prior, TrainState& state);

// One descent update on (theta, phi) with the ratio parameters frozen.
// Returns the step's metric row (dre columns left zero).
MetricRow model_update(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                       const SampleBank& prior, TrainState& state,
                       const PriorLogDensityFn& prior_log_density, std::int64_t step);

// Alternating bi-level optimization. Per step: ratio_steps ascent updates on
// the ratio parameters (the DRE objectives), then one descent update on
// (theta, phi). vae-baseline mode needs prior_log_density and trains no
// ratio nets. Deterministic given the config seed and the state's cursors;
// aborts with a NumericError naming the step and sub-term if a loss goes
// non-finite.
TrainResult train(const TrainConfig& cfg, const Models& models, const SampleBank& data,
                  const SampleBank& prior, TrainState state,
                  const PriorLogDensityFn& prior_log_density = nullptr);

// ---- checkpointing ---------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

// Self-describing JSON document: shape metadata plus flat fp64 arrays encoded
// losslessly (hex of the IEEE-754 bits). Save -> load -> save is
// byte-identical.
void checkpoint_save(const TrainState& state, const TrainConfig& cfg, const Models& models,
                     const std::string& path);

// Validates the format version and the structural fingerprint against the
// given models before accepting the state.
TrainState checkpoint_load(const std::string& path, const TrainConfig& cfg,
                           const Models& models);

}  // namespace ilvm
