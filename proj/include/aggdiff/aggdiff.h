/* C interface to the aggregation-diffusion solver. */
#ifndef AGGDIFF_H
#define AGGDIFF_H

#include <stddef.h>

#if defined(AGGDIFF_BUILDING_LIBRARY)
#define AGGDIFF_API __attribute__((visibility("default")))
#else
#define AGGDIFF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aggdiff_status {
  AGGDIFF_OK = 0,
  AGGDIFF_ERR_INVALID_ARGUMENT = 1,
  AGGDIFF_ERR_DOMAIN = 2,
  AGGDIFF_ERR_EXTRAPOLATION = 3,
  AGGDIFF_ERR_INSUFFICIENT_RESOLUTION = 4,
  AGGDIFF_ERR_GRID_MISMATCH = 5,
  AGGDIFF_ERR_MASS_MISMATCH = 6,
  AGGDIFF_ERR_DOMAIN_TOO_SMALL = 7,
  AGGDIFF_ERR_MEMORY_CAP = 8,
  AGGDIFF_ERR_CONFIG = 9,
  AGGDIFF_ERR_IO = 10,
  AGGDIFF_ERR_NUMERIC = 11,
  AGGDIFF_ERR_INTERNAL = 99
} aggdiff_status;

typedef enum aggdiff_kernel_family {
  AGGDIFF_KERNEL_NEWTONIAN = 0,
  AGGDIFF_KERNEL_BESSEL = 1,
  AGGDIFF_KERNEL_GAUSSIAN = 2,
  AGGDIFF_KERNEL_POWER_DECAY = 3
} aggdiff_kernel_family;

/* Outcome of running a scenario (all of its lambdas). */
typedef struct aggdiff_outcome {
  int runs;
  int completed;
  int blowups;
  int inconclusive;
  int failed; /* runs that stopped on an error */
} aggdiff_outcome;

typedef struct aggdiff_fit {
  double exponent;
  double intercept;
  double r2;
  double stderr_;
  int samples;
} aggdiff_fit;

typedef struct aggdiff_kernel aggdiff_kernel;
typedef struct aggdiff_field aggdiff_field;
typedef struct aggdiff_scenario aggdiff_scenario;

AGGDIFF_API const char* aggdiff_version(void);
/* Message of the last failed call on this thread; empty when none. */
AGGDIFF_API const char* aggdiff_last_error(void);
AGGDIFF_API void aggdiff_string_free(char* s);

/* param1: alpha, sigma or gamma; param2: core radius (power_decay only). */
AGGDIFF_API aggdiff_status aggdiff_kernel_create(aggdiff_kernel_family family, int dim, double param1,
                                                 double param2, aggdiff_kernel** out);
AGGDIFF_API aggdiff_status aggdiff_kernel_create_tabulated(int dim, const double* r, const double* k_prime,
                                                           size_t n, aggdiff_kernel** out);
AGGDIFF_API aggdiff_status aggdiff_kernel_load_csv(const char* path, int dim, aggdiff_kernel** out);
AGGDIFF_API void aggdiff_kernel_destroy(aggdiff_kernel* k);
AGGDIFF_API aggdiff_status aggdiff_kernel_gradient(const aggdiff_kernel* k, double r, double* out);
/* *divergent is set to 1 when the norm is infinite (then *value is NaN). */
AGGDIFF_API aggdiff_status aggdiff_kernel_lq_norm(const aggdiff_kernel* k, double q, double* value,
                                                  int* divergent);

AGGDIFF_API aggdiff_status aggdiff_field_create(int dim, int cells, double r_max, const double* values,
                                                aggdiff_field** out);
AGGDIFF_API aggdiff_status aggdiff_field_read_csv(const char* path, int dim, aggdiff_field** out);
AGGDIFF_API aggdiff_status aggdiff_field_write_csv(const aggdiff_field* f, const char* path);
AGGDIFF_API size_t aggdiff_field_size(const aggdiff_field* f);
/* Copies min(n, size) cell values into out. */
AGGDIFF_API aggdiff_status aggdiff_field_values(const aggdiff_field* f, double* out, size_t n);
AGGDIFF_API aggdiff_status aggdiff_field_mass(const aggdiff_field* f, double* out);
AGGDIFF_API void aggdiff_field_destroy(aggdiff_field* f);

/* Entropy report of a similarity-variable density as a JSON object (free with aggdiff_string_free). */
AGGDIFF_API aggdiff_status aggdiff_entropy_audit(const aggdiff_field* f, double mass, const char* source,
                                                 char** json);

/* Power-law fit of a diagnostics JSON-lines series over [lo, hi]. */
AGGDIFF_API aggdiff_status aggdiff_fit_jsonl(const char* path, const char* series, double lo, double hi,
                                             aggdiff_fit* out);

AGGDIFF_API aggdiff_status aggdiff_scenario_load(const char* path, aggdiff_scenario** out);
AGGDIFF_API aggdiff_status aggdiff_scenario_parse(const char* text, const char* origin, aggdiff_scenario** out);
/* Replaces the output directory (NULL or "" disables file output). */
AGGDIFF_API aggdiff_status aggdiff_scenario_set_output_dir(aggdiff_scenario* s, const char* dir);
AGGDIFF_API void aggdiff_scenario_destroy(aggdiff_scenario* s);
/* Runs every lambda of the scenario. summary_json (optional) receives the sweep summary. */
AGGDIFF_API aggdiff_status aggdiff_scenario_run(const aggdiff_scenario* s, aggdiff_outcome* outcome,
                                                char** summary_json);
/* Lambda sweep with the kernel hypothesis check and bracket classification. */
AGGDIFF_API aggdiff_status aggdiff_scenario_sweep(const aggdiff_scenario* s, aggdiff_outcome* outcome,
                                                  char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
