/* C interface of the surfns library.
 *
 * Every function returns a surfns_status. On failure the message is available
 * from surfns_last_error() until the next call on the same thread. Handles are
 * opaque; each *_create / *_parse has a matching *_free that accepts NULL.
 * Strings returned through char** are owned by the caller and released with
 * surfns_string_free(). */
#ifndef SURFNS_H
#define SURFNS_H

#include <stddef.h>

#if defined(_WIN32)
#define SURFNS_API __declspec(dllexport)
#else
#define SURFNS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum surfns_status {
  SURFNS_OK = 0,
  SURFNS_ERR_ARGUMENT = 1,
  SURFNS_ERR_STRUCTURAL = 2,
  SURFNS_ERR_DEGENERATE_ELEMENT = 3,
  SURFNS_ERR_SINGULAR_MASS = 4,
  SURFNS_ERR_SOLVER_SETUP = 5,
  SURFNS_ERR_ITERATIVE_FAILURE = 6,
  SURFNS_ERR_SINGULAR_MATRIX = 7,
  SURFNS_ERR_SIZE_CAP = 8,
  SURFNS_ERR_USAGE = 9,
  SURFNS_ERR_PARSE = 10,
  SURFNS_ERR_VALIDATION = 11,
  SURFNS_ERR_IO = 12,
  SURFNS_ERR_INTERNAL = 13
} surfns_status;

typedef struct surfns_config surfns_config;
typedef struct surfns_sim surfns_sim;

typedef struct surfns_diagnostics {
  long step;
  double t;
  double area;
  double volume;
  double kinetic;
  double bending;
  double total;
  double div_residual;
  int solver_iters;
  double solver_seconds;
  double certificate;
} surfns_diagnostics;

typedef void (*surfns_step_callback)(const surfns_diagnostics* diagnostics, void* user);

SURFNS_API const char* surfns_version(void);
SURFNS_API const char* surfns_status_name(surfns_status status);
SURFNS_API const char* surfns_last_error(void);
/* Process exit code for a status: 0 ok, 2 usage/parse/validation, 1 otherwise. */
SURFNS_API int surfns_exit_code(surfns_status status);
SURFNS_API void surfns_string_free(char* s);

/* ---- configuration ---- */
SURFNS_API surfns_status surfns_config_default(surfns_config** out);
SURFNS_API surfns_status surfns_config_parse(const char* text, surfns_config** out);
SURFNS_API surfns_status surfns_config_load(const char* path, surfns_config** out);
SURFNS_API surfns_status surfns_config_serialize(const surfns_config* config, char** out);
/* Overrides [output] directory. */
SURFNS_API surfns_status surfns_config_set_output(surfns_config* config, const char* directory);
SURFNS_API void surfns_config_free(surfns_config* config);

/* ---- simulation handle ---- */
SURFNS_API surfns_status surfns_sim_create(const surfns_config* config, surfns_sim** out);
/* Continues from a state file written by surfns_sim_save_state. */
SURFNS_API surfns_status surfns_sim_resume(const surfns_config* config, const char* state_path,
                                           surfns_sim** out);
/* One step; on failure the simulation state is unchanged. */
SURFNS_API surfns_status surfns_sim_step(surfns_sim* sim);
/* Steps to the configured final time; the callback runs after every step. */
SURFNS_API surfns_status surfns_sim_run(surfns_sim* sim, surfns_step_callback cb, void* user);
SURFNS_API surfns_status surfns_sim_total_steps(const surfns_sim* sim, long* out);
SURFNS_API surfns_status surfns_sim_diagnostics(const surfns_sim* sim, surfns_diagnostics* out);
SURFNS_API surfns_status surfns_sim_node_count(const surfns_sim* sim, size_t* out);
/* Copies 3 * node_count interleaved coordinates; capacity counts doubles. */
SURFNS_API surfns_status surfns_sim_nodes(const surfns_sim* sim, double* xyz, size_t capacity);
SURFNS_API surfns_status surfns_sim_velocity(const surfns_sim* sim, double* uvw, size_t capacity);
SURFNS_API surfns_status surfns_sim_write_vtk(const surfns_sim* sim, const char* path);
SURFNS_API surfns_status surfns_sim_write_csv(const surfns_sim* sim, const char* path);
SURFNS_API surfns_status surfns_sim_save_state(const surfns_sim* sim, const char* path);
SURFNS_API void surfns_sim_free(surfns_sim* sim);

/* ---- drivers ---- */
typedef struct surfns_run_summary {
  long steps;
  double final_time;
  int snapshots;
  surfns_diagnostics last;
} surfns_run_summary;

/* Runs a configuration and writes its outputs. resume_path may be NULL. */
SURFNS_API surfns_status surfns_run(const surfns_config* config, const char* resume_path,
                                    surfns_step_callback cb, void* user,
                                    surfns_run_summary* summary);

typedef struct surfns_converge_options {
  const int* levels;
  size_t num_levels;
  double final_time;
  double tau_power;
  const char* profile; /* "sine", "sine:<a>:<w>", "constant[:<r0>]" */
  int restart;
  int max_iter;
  double tol;
} surfns_converge_options;

typedef struct surfns_converge_row {
  int level;
  int triangles;
  double h0;
  double tau;
  double err_surface;
  double err_pressure_raw;
  double err_pressure_shifted;
  int ok;
} surfns_converge_row;

typedef void (*surfns_converge_callback)(const surfns_converge_row* row, void* user);

/* Levels 2, 3, 4, T = 1, tau = h^3, profile "sine". */
SURFNS_API void surfns_converge_default_options(surfns_converge_options* options);
/* Manufactured-sphere convergence table as CSV in *csv (may be NULL).
 * *failed_rows counts rows whose run failed (may be NULL). */
SURFNS_API surfns_status surfns_converge(const surfns_converge_options* options,
                                         surfns_converge_callback cb, void* user, char** csv,
                                         int* failed_rows);

typedef void (*surfns_check_callback)(const char* name, int passed, const char* detail,
                                      void* user);
/* Runs the verification suite; *failures receives the failed-check count. */
SURFNS_API surfns_status surfns_verify(surfns_check_callback cb, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif
