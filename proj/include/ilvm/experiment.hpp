#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ilvm/trainer.hpp"

namespace ilvm {

enum class ExperimentKind { banana, linear_ppca, gaussian_sanity };
enum class DataSource { synthetic_banana_mlp, synthetic_linear_gaussian, synthetic_gaussian,
                        csv, idx };
enum class PriorSource { banana, gaussian, csv };

ExperimentKind experiment_kind_from_string(const std::string& s);
const char* experiment_kind_name(ExperimentKind k);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::banana;
  TrainConfig config;

  DataSource data_source = DataSource::synthetic_banana_mlp;
  std::string data_csv;
  std::string idx_images;
  std::string idx_labels;
  std::int64_t data_n = 12000;       // synthetic sources
  std::int64_t data_dim = 8;         // synthetic sources
  double data_noise = 0.05;          // synthetic observation noise
  std::uint64_t data_seed = 7;
  std::int64_t train_cap = 10000;
  std::int64_t test_cap = 2000;

  PriorSource prior_source = PriorSource::banana;
  std::string prior_csv;
  std::int64_t prior_count = 10000;
  double prior_rho = 0.95;
  std::int64_t latent_dim = 2;

  std::string output_dir = "out";
  std::int64_t eval_batch = 2000;
  std::int64_t grid_side = 20;
};

// Plain-text key-value spec document ("key = value", '#' comments).
// Unknown keys, bad values and missing input paths raise SpecError.
ExperimentSpec parse_spec_file(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin);

// Dataset materialization: full bank plus labels (zeros unless the source
// provides them), deterministically split 6:1 into train/test by the data
// seed and capped to train_cap/test_cap rows.
struct Dataset {
  SampleBank train;
  SampleBank test;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

Dataset build_dataset(const ExperimentSpec& spec);

struct Prior {
  SampleBank bank;
  PriorLogDensityFn log_density;  // null when the prior has no analytic form
};

Prior build_prior(const ExperimentSpec& spec);

struct EvalResult {
  double mse_x = 0;
  double mse_z = 0;
  std::int64_t n_test = 0;
  std::int64_t n_prior = 0;
};

// Per-dimension-normalized reconstruction errors through the mean maps:
//   mse_x = E ||x - mu(m(x))||^2 / D  over the test bank,
//   mse_z = E ||z - m(mu(z))||^2 / K  over the prior eval bank.
EvalResult evaluate(const Models& models, const TrainState& state, const SampleBank& test,
                    const SampleBank& prior_eval);

struct ExperimentOutputs {
  std::string metrics_csv;
  std::string checkpoint;
  std::string prior_cloud_csv;
  std::string posterior_cloud_csv;
  std::string grid_csv;
  std::string eval_csv;
  EvalResult eval;
};

// Trains per the spec and emits metrics, the final checkpoint, the three
// point clouds and the evaluation summary into the output directory.
// If output_root is nonempty, a relative output_dir is placed under it; the
// ILVM_OUTPUT_ROOT environment variable provides the same override.
ExperimentOutputs run_experiment(const ExperimentSpec& spec, const std::string& output_root = "");

// Loads a checkpoint against the spec's configuration and evaluates it.
EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const ExperimentSpec& spec);

// Decoded mean map over a uniform grid covering the prior bank's bounding
// box: grid coordinates first, decoded means appended (side^2 rows).
TensorValue decode_grid(const Models& models, const TrainState& state, const SampleBank& prior,
                        std::int64_t side);

std::string resolve_output_dir(const ExperimentSpec& spec, const std::string& output_root);

}  // namespace ilvm
