/*
 * cloudtrust C API.
 *
 * Every function returns a ct_status. On failure the thread-local message from
 * ct_last_error() describes what went wrong. Strings handed out through char**
 * parameters are owned by the caller and must be released with ct_string_free.
 * Handles are opaque and released with their matching *_free function; passing
 * NULL to a *_free function is a no-op.
 */
#ifndef CLOUDTRUST_H
#define CLOUDTRUST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CLOUDTRUST_BUILDING_LIBRARY)
#    define CT_API __declspec(dllexport)
#  else
#    define CT_API __declspec(dllimport)
#  endif
#else
#  define CT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ct_status {
  CT_OK = 0,
  CT_ERR_NULL_ARGUMENT = 1,
  CT_ERR_DOMAIN = 2,      /* argument outside the valid range */
  CT_ERR_CONFIG = 3,      /* inconsistent scenario or missing file */
  CT_ERR_PARSE = 4,       /* scenario document failed to parse or validate */
  CT_ERR_NUMERIC = 5,     /* non-finite state or failed factorization */
  CT_ERR_NOT_FOUND = 6,   /* unknown builtin or profile name */
  CT_ERR_INTERNAL = 7,
  CT_ERR_OUT_OF_MEMORY = 8
} ct_status;

typedef enum ct_gne_status {
  CT_GNE_CONVERGED = 0,
  CT_GNE_LIMIT_CYCLE_RESOLVED = 1,
  CT_GNE_FAILED = 2
} ct_gne_status;

typedef struct ct_scenario ct_scenario;
typedef struct ct_gne_result ct_gne_result;
typedef struct ct_trace ct_trace;

typedef struct ct_flipit_equilibrium {
  double f_A;
  double f_D;
  double p_A;
  double u_A;
  double u_D;
} ct_flipit_equilibrium;

CT_API const char* ct_version(void);
CT_API const char* ct_last_error(void);
CT_API void ct_string_free(char* s);

/* Scenarios. `name` for ct_scenario_builtin is "fourservice" or "vehicles". */
CT_API ct_status ct_scenario_load(const char* path, ct_scenario** out);
CT_API ct_status ct_scenario_parse(const char* json_text, ct_scenario** out);
CT_API ct_status ct_scenario_builtin(const char* name, ct_scenario** out);
CT_API ct_status ct_scenario_to_json(const ct_scenario* s, char** out);
CT_API ct_status ct_scenario_hash(const ct_scenario* s, char** out);
/* One line per optional field that was filled with its default. */
CT_API ct_status ct_scenario_defaults_log(const ct_scenario* s, char** out);
/* Writes a text report; *ok is 1 when every assumption check passed. */
CT_API ct_status ct_scenario_validate(const ct_scenario* s, char** report, int* ok);
CT_API void ct_scenario_free(ct_scenario* s);

/* Gestalt equilibrium. */
CT_API ct_status ct_gne_solve(const ct_scenario* s, ct_gne_result** out);
CT_API ct_status ct_gne_result_status(const ct_gne_result* r, ct_gne_status* out);
CT_API ct_status ct_gne_result_compromise(const ct_gne_result* r, size_t service, double* p_A);
CT_API ct_status ct_gne_to_json(const ct_gne_result* r, char** out);
CT_API void ct_gne_free(ct_gne_result* r);

/* Closed-loop simulation of a named strategy profile. */
CT_API ct_status ct_simulate(const ct_scenario* s, const char* profile, uint64_t seed, ct_trace** out);
CT_API ct_status ct_trace_to_csv(const ct_trace* t, char** out);
CT_API ct_status ct_trace_cost(const ct_trace* t, double* J);
CT_API void ct_trace_free(ct_trace* t);

/* Cost table over all profiles of the scenario, as CSV. */
CT_API ct_status ct_bench(const ct_scenario* s, int trials, uint64_t seed, char** csv);

/* FlipIt primitives. */
CT_API ct_status ct_flipit_control_ratio(double f_A, double f_D, double* out);
CT_API ct_status ct_flipit_solve(double v_A, double v_D, double alpha_A, double alpha_D,
                                 ct_flipit_equilibrium* out);
CT_API ct_status ct_flipit_map(double v_AD, double alpha_A, double alpha_D, double* p_A);

#ifdef __cplusplus
}
#endif

#endif /* CLOUDTRUST_H */
