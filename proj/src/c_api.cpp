#include "ilvm/ilvm_c.h"

#include <iostream>
#include <string>

#include "ilvm/experiment.hpp"
#include "ilvm/selftest.hpp"

using namespace ilvm;

struct ilvm_experiment {
  ExperimentSpec spec;
  std::string output_root;
  std::string resolved_dir;
};

namespace {

thread_local std::string g_last_error = "no error";

ilvm_status fail(ilvm_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
ilvm_status guarded(Fn&& fn) {
  try {
    fn();
    return ILVM_OK;
  } catch (const SpecError& e) {
    return fail(ILVM_E_INVALID_SPEC, e.what());
  } catch (const NumericError& e) {
    return fail(ILVM_E_NUMERIC, e.what());
  } catch (const IoError& e) {
    return fail(ILVM_E_IO, e.what());
  } catch (const std::exception& e) {
    return fail(ILVM_E_INTERNAL, e.what());
  }
}

}  // namespace

extern "C" {

int ilvm_abi_version(void) { return 1; }

const char* ilvm_status_name(ilvm_status status) {
  switch (status) {
    case ILVM_OK: return "ok";
    case ILVM_E_INVALID_SPEC: return "invalid-spec";
    case ILVM_E_NUMERIC: return "numeric-abort";
    case ILVM_E_IO: return "io-error";
    case ILVM_E_BAD_HANDLE: return "bad-handle";
    case ILVM_E_INTERNAL: return "internal-error";
  }
  return "unknown";
}

const char* ilvm_last_error(void) { return g_last_error.c_str(); }

ilvm_status ilvm_experiment_open(const char* spec_path, ilvm_experiment** out) {
  if (!out) return fail(ILVM_E_BAD_HANDLE, "null output handle");
  *out = nullptr;
  if (!spec_path) return fail(ILVM_E_BAD_HANDLE, "null spec path");
  return guarded([&] {
    auto* exp = new ilvm_experiment{};
    try {
      exp->spec = parse_spec_file(spec_path);
      exp->resolved_dir = resolve_output_dir(exp->spec, "");
    } catch (...) {
      delete exp;
      throw;
    }
    *out = exp;
  });
}

ilvm_status ilvm_experiment_set_output_root(ilvm_experiment* exp, const char* root) {
  if (!exp) return fail(ILVM_E_BAD_HANDLE, "null experiment handle");
  exp->output_root = root ? root : "";
  exp->resolved_dir = resolve_output_dir(exp->spec, exp->output_root);
  return ILVM_OK;
}

ilvm_status ilvm_experiment_run(ilvm_experiment* exp) {
  if (!exp) return fail(ILVM_E_BAD_HANDLE, "null experiment handle");
  return guarded([&] {
    auto outputs = run_experiment(exp->spec, exp->output_root);
    exp->resolved_dir = resolve_output_dir(exp->spec, exp->output_root);
    (void)outputs;
  });
}

ilvm_status ilvm_experiment_evaluate(ilvm_experiment* exp, const char* checkpoint_path,
                                     double* mse_x, double* mse_z) {
  if (!exp) return fail(ILVM_E_BAD_HANDLE, "null experiment handle");
  if (!checkpoint_path || !mse_x || !mse_z) {
    return fail(ILVM_E_BAD_HANDLE, "null argument");
  }
  return guarded([&] {
    EvalResult r = evaluate_checkpoint(checkpoint_path, exp->spec);
    *mse_x = r.mse_x;
    *mse_z = r.mse_z;
  });
}

const char* ilvm_experiment_output_dir(ilvm_experiment* exp) {
  if (!exp) return "";
  return exp->resolved_dir.c_str();
}

void ilvm_experiment_close(ilvm_experiment* exp) { delete exp; }

ilvm_status ilvm_selftest(int verbose, int* out_failures) {
  if (!out_failures) return fail(ILVM_E_BAD_HANDLE, "null output argument");
  return guarded([&] { *out_failures = selftest_run(std::cout, verbose != 0); });
}

}  // extern "C"
