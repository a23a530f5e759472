#ifndef FOGCTL_FOGCTL_H
#define FOGCTL_FOGCTL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FOGCTL_BUILDING_LIBRARY)
#    define FOGCTL_API __declspec(dllexport)
#  else
#    define FOGCTL_API __declspec(dllimport)
#  endif
#else
#  define FOGCTL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fogctl_status {
  FOGCTL_OK = 0,
  FOGCTL_ERR_INVALID_ARGUMENT = 1,
  FOGCTL_ERR_MODEL = 2,
  FOGCTL_ERR_CONFIG = 3,
  FOGCTL_ERR_NUMERIC = 4,
  FOGCTL_ERR_UNSUPPORTED = 5,
  FOGCTL_ERR_REGIME = 6,
  FOGCTL_ERR_INTERNAL = 7
} fogctl_status;

typedef enum fogctl_command {
  FOGCTL_CMD_GAINS = 0,
  FOGCTL_CMD_SIMULATE = 1,
  FOGCTL_CMD_VERIFY = 2,
  FOGCTL_CMD_PLACEMENT = 3,
  FOGCTL_CMD_WAYPOINTS = 4
} fogctl_command;

typedef enum fogctl_format { FOGCTL_FORMAT_JSON = 0, FOGCTL_FORMAT_CSV = 1 } fogctl_format;

typedef enum fogctl_matrix_kind {
  FOGCTL_MATRIX_K = 0,
  FOGCTL_MATRIX_L = 1,
  FOGCTL_MATRIX_LAMBDA = 2,
  FOGCTL_MATRIX_V = 3,
  FOGCTL_MATRIX_P = 4
} fogctl_matrix_kind;

typedef struct fogctl_config fogctl_config;
typedef struct fogctl_result fogctl_result;
typedef struct fogctl_model fogctl_model;
typedef struct fogctl_schedule fogctl_schedule;

typedef struct fogctl_run_options {
  int has_seed;
  uint64_t seed;
  int has_replications;
  int replications;
  fogctl_format format;
} fogctl_run_options;

FOGCTL_API const char* fogctl_version(void);

/* Message of the last failed call on this thread ("" if none). */
FOGCTL_API const char* fogctl_last_error(void);

FOGCTL_API void fogctl_string_free(char* s);

FOGCTL_API fogctl_status fogctl_config_load(const char* path, fogctl_config** out);
FOGCTL_API fogctl_status fogctl_config_parse(const char* json_text, fogctl_config** out);
/* Normalized JSON of the configuration; release with fogctl_string_free. */
FOGCTL_API fogctl_status fogctl_config_to_json(const fogctl_config* config, char** out);
FOGCTL_API size_t fogctl_config_warning_count(const fogctl_config* config);
FOGCTL_API const char* fogctl_config_warning(const fogctl_config* config, size_t index);
FOGCTL_API void fogctl_config_free(fogctl_config* config);

/* options may be NULL. A verification that runs but fails still returns
   FOGCTL_OK; check fogctl_result_passed. */
FOGCTL_API fogctl_status fogctl_run_command(fogctl_command command, const fogctl_config* config,
                                            const fogctl_run_options* options, fogctl_result** out);
FOGCTL_API int fogctl_result_passed(const fogctl_result* result);
FOGCTL_API size_t fogctl_result_file_count(const fogctl_result* result);
FOGCTL_API const char* fogctl_result_file_name(const fogctl_result* result, size_t index);
FOGCTL_API const char* fogctl_result_file_data(const fogctl_result* result, size_t index, size_t* length);
FOGCTL_API void fogctl_result_free(fogctl_result* result);

/* Time-invariant model; matrices are row-major. C = I, V = 0, no drift. */
FOGCTL_API fogctl_status fogctl_model_create_constant(int horizon, int state_dim, int control_dim, const double* a,
                                                      const double* b, const double* q, const double* r,
                                                      const double* w, const double* q_terminal,
                                                      fogctl_model** out);
FOGCTL_API void fogctl_model_free(fogctl_model* model);

/* forward = backward = 0 selects the perfect match. */
FOGCTL_API fogctl_status fogctl_schedule_compute(const fogctl_model* model, double p, int forward, int backward,
                                                 fogctl_schedule** out);
FOGCTL_API int fogctl_schedule_length(const fogctl_schedule* schedule, fogctl_matrix_kind kind);
/* Copies matrix `kind` at stage k (row-major) into out when capacity allows;
   rows/cols are always reported. */
FOGCTL_API fogctl_status fogctl_schedule_matrix(const fogctl_schedule* schedule, fogctl_matrix_kind kind, int k,
                                                double* out, size_t capacity, int* rows, int* cols);
FOGCTL_API void fogctl_schedule_free(fogctl_schedule* schedule);

/* Full-observation closed-form minimum cost for the schedule's regime. */
FOGCTL_API fogctl_status fogctl_min_cost(const fogctl_model* model, const fogctl_schedule* schedule, const double* x0,
                                         double tau0_on, double* total);

FOGCTL_API fogctl_status fogctl_brute_force(const fogctl_model* model, double p, double q, double tau0_on,
                                            int forward, int backward, const double* x0, double* total);

#ifdef __cplusplus
}
#endif

#endif
