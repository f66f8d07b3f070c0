// Command line front end. Links only the C API.
//
// Exit codes: 0 success, 1 invalid spec (or other usage/file errors),
// 2 numeric abort.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "ilvm/ilvm_c.h"

namespace {

int exit_code_for(ilvm_status status) {
  switch (status) {
    case ILVM_OK: return 0;
    case ILVM_E_NUMERIC: return 2;
    default: return 1;
  }
}

int report(ilvm_status status) {
  if (status != ILVM_OK) {
    std::fprintf(stderr, "error (%s): %s\n", ilvm_status_name(status), ilvm_last_error());
  }
  return exit_code_for(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"implicit latent variable models: training, evaluation and self checks"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string checkpoint_path;
  std::string output_root;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "train an experiment from a spec file and emit outputs");
  run->add_option("spec", spec_path, "experiment spec file")->required();
  run->add_option("--output-root", output_root,
                  "directory that relative output_dir values are placed under");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint against a spec's held-out data");
  eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("spec", spec_path, "experiment spec file")->required();

  auto* selftest = app.add_subcommand("selftest", "run the identity and property suites");
  selftest->add_flag("-v,--verbose", verbose, "verbose output");

  CLI11_PARSE(app, argc, argv);

  if (selftest->parsed()) {
    int failures = 0;
    const ilvm_status status = ilvm_selftest(verbose ? 1 : 0, &failures);
    if (status != ILVM_OK) return report(status);
    if (failures > 0) {
      std::fprintf(stderr, "selftest: %d check(s) failed\n", failures);
      return 1;
    }
    std::printf("selftest: all checks passed\n");
    return 0;
  }

  ilvm_experiment* exp = nullptr;
  ilvm_status status = ilvm_experiment_open(spec_path.c_str(), &exp);
  if (status != ILVM_OK) return report(status);

  if (run->parsed()) {
    if (!output_root.empty()) {
      status = ilvm_experiment_set_output_root(exp, output_root.c_str());
    }
    if (status == ILVM_OK) status = ilvm_experiment_run(exp);
    if (status == ILVM_OK) {
      std::printf("outputs written to %s\n", ilvm_experiment_output_dir(exp));
    }
  } else {
    double mse_x = 0;
    double mse_z = 0;
    status = ilvm_experiment_evaluate(exp, checkpoint_path.c_str(), &mse_x, &mse_z);
    if (status == ILVM_OK) {
      std::printf("mse_x=%.6f mse_z=%.6f\n", mse_x, mse_z);
    }
  }
  ilvm_experiment_close(exp);
  return report(status);
}
