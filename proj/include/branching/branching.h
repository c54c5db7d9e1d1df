#ifndef BRANCHING_H
#define BRANCHING_H

/* C interface to the branching-process library. All functions return a
 * bp_status; on failure bp_last_error() describes the error for the calling
 * thread. Strings returned through char** are owned by the caller and must be
 * released with bp_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(BP_BUILDING_LIBRARY)
#define BP_API __attribute__((visibility("default")))
#else
#define BP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bp_status {
  BP_OK = 0,
  BP_ERR_ARGUMENT = 1,
  BP_ERR_IO = 2,
  BP_ERR_PARSE = 3,
  BP_ERR_VALIDATION = 4,
  BP_ERR_UNSUPPORTED = 5,
  BP_ERR_NOT_CONVERGED = 6,
  BP_ERR_CONDITIONING = 7,
  BP_ERR_LIMIT = 8,
  BP_ERR_SNAPSHOT = 9,
  BP_ERR_INTERNAL = 10
} bp_status;

typedef struct bp_model bp_model;

BP_API const char* bp_version(void);
BP_API const char* bp_last_error(void);
BP_API const char* bp_status_name(bp_status status);
BP_API void bp_string_free(char* s);

BP_API bp_status bp_model_load_file(const char* path, bp_model** out);
BP_API bp_status bp_model_load_json(const char* text, bp_model** out);
BP_API void bp_model_free(bp_model* model);
BP_API size_t bp_model_types(const bp_model* model);
/* "bgw", "sevastyanov" or "general". */
BP_API const char* bp_model_variant(const bp_model* model);
BP_API bp_status bp_model_to_json(const bp_model* model, char** out);

typedef struct bp_solve_info {
  uint64_t iterations;
  double residual;
  double last_step;
  int monotone;
} bp_solve_info;

/* q_out holds bp_model_types(model) values. info may be NULL. */
BP_API bp_status bp_solve_q(const bp_model* model, double tol, uint64_t max_iter, double* q_out,
                            bp_solve_info* info);

BP_API bp_status bp_offspring_pgf(const bp_model* model, size_t type, const double* z,
                                  double* out);
/* Row-major types x types. */
BP_API bp_status bp_mean_matrix(const bp_model* model, double* out);
BP_API bp_status bp_pgf_jacobian(const bp_model* model, const double* z, double* out);

typedef struct bp_q_estimate {
  double estimate;
  double ci_low;
  double ci_high;
  uint64_t runs;
  uint64_t extinct;
  uint64_t censored;
} bp_q_estimate;

BP_API bp_status bp_estimate_q(const bp_model* model, size_t root, uint64_t runs, uint64_t cap,
                               double horizon, uint64_t seed, unsigned threads,
                               bp_q_estimate* out);

/* Tilted kernel as JSON. q may be NULL, in which case it is solved with
 * tolerance tol. For sampler-only models a nonzero acceptance_attempts adds
 * an estimated acceptance rate per type, drawn with seed. */
BP_API bp_status bp_tilt(const bp_model* model, const double* q, double tol,
                         uint64_t acceptance_attempts, uint64_t seed, char** json_out);

typedef enum bp_tilt_method { BP_TILT_AUTO = 0, BP_TILT_ANALYTIC = 1, BP_TILT_REJECTION = 2 } bp_tilt_method;

typedef struct bp_sim_options {
  size_t root;
  uint64_t runs;
  uint64_t seed;
  uint64_t cap;
  double horizon;
  uint32_t snapshot_depth;
  int64_t max_generation; /* negative: none */
  int tilted;
  bp_tilt_method method;
  const double* q; /* NULL: solved with tol */
  double tol;
  unsigned threads;
} bp_sim_options;

BP_API void bp_sim_options_init(bp_sim_options* options);

/* Receives one JSON record per run, in replicate order. */
typedef void (*bp_record_fn)(void* ctx, uint64_t replicate, const char* json);

typedef struct bp_sim_summary {
  uint64_t runs;
  uint64_t extinct;
  uint64_t censored;
  double mean_total_progeny;
} bp_sim_summary;

/* summary_csv (metric,generation,type,value) and summary may be NULL. */
BP_API bp_status bp_simulate(const bp_model* model, const bp_sim_options* options,
                             bp_record_fn sink, void* ctx, char** summary_csv,
                             bp_sim_summary* summary);

typedef struct bp_verify_options {
  const char* suite; /* q, tilt, rn, subcritical, malthus, branching, all */
  size_t root;
  uint64_t runs;
  uint64_t seed;
  uint64_t cap;
  double tol;
  unsigned threads;
} bp_verify_options;

BP_API void bp_verify_options_init(bp_verify_options* options);

/* report_json: array of test reports. meta_json: array of
 * {name, runtime_seconds}; may be NULL. */
BP_API bp_status bp_verify(const bp_model* model, const bp_verify_options* options,
                           char** report_json, char** meta_json, int* all_pass);

#ifdef __cplusplus
}
#endif

#endif
