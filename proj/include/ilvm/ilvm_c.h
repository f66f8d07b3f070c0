/* C interface to the ilvm core: opaque handles and status codes.
 *
 * Every function returns ILVM_OK on success. On failure the returned status
 * classifies the error and ilvm_last_error() carries a human-readable
 * message (thread-local, valid until the next failing call on the same
 * thread). Handles are created and destroyed by this library only.
 */
#ifndef ILVM_C_H
#define ILVM_C_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ilvm_status {
  ILVM_OK = 0,
  ILVM_E_INVALID_SPEC = 1, /* spec file missing, malformed or inconsistent */
  ILVM_E_NUMERIC = 2,      /* non-finite loss or other numeric abort */
  ILVM_E_IO = 3,           /* file errors: bad paths, corrupt checkpoints */
  ILVM_E_BAD_HANDLE = 4,   /* null or already-closed handle */
  ILVM_E_INTERNAL = 5      /* anything else */
} ilvm_status;

typedef struct ilvm_experiment ilvm_experiment;

/* ABI version of this header; bumped on incompatible changes. */
int ilvm_abi_version(void);

const char* ilvm_status_name(ilvm_status status);

/* Message of the most recent failure on this thread; never NULL. */
const char* ilvm_last_error(void);

/* Parses and validates a spec file. On success *out owns the experiment. */
ilvm_status ilvm_experiment_open(const char* spec_path, ilvm_experiment** out);

/* Places relative output directories under root (overrides the
 * ILVM_OUTPUT_ROOT environment variable). */
ilvm_status ilvm_experiment_set_output_root(ilvm_experiment* exp, const char* root);

/* Trains per the spec and writes metrics, checkpoint, point clouds and the
 * evaluation summary into the output directory. */
ilvm_status ilvm_experiment_run(ilvm_experiment* exp);

/* Loads a checkpoint produced by a run of this spec and evaluates the
 * per-dimension reconstruction errors. */
ilvm_status ilvm_experiment_evaluate(ilvm_experiment* exp, const char* checkpoint_path,
                                     double* mse_x, double* mse_z);

/* Absolute output directory for this experiment; valid while exp lives. */
const char* ilvm_experiment_output_dir(ilvm_experiment* exp);

void ilvm_experiment_close(ilvm_experiment* exp);

/* Runs the identity/property suites, printing one line per check to stdout.
 * *out_failures receives the number of failed checks. */
ilvm_status ilvm_selftest(int verbose, int* out_failures);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ILVM_C_H */
