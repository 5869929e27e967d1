/* camot — class-agnostic multi-object tracking engine.
 *
 * C API of the shared library. All functions return a camot_status; on
 * failure camot_last_error() carries a human-readable message for the
 * calling thread. Strings returned through out-parameters are heap
 * allocated and must be released with camot_string_free().
 */
#ifndef CAMOT_H
#define CAMOT_H

#include <stddef.h>

#if defined _WIN32
#define CAMOT_API __declspec(dllexport)
#else
#define CAMOT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum camot_status {
  CAMOT_OK = 0,
  CAMOT_ERROR_INVALID_ARGUMENT = 1, /* bad arguments or malformed input files */
  CAMOT_ERROR_IO = 2,               /* file system failure */
  CAMOT_ERROR_INTERNAL = 3          /* broken invariant: a bug */
} camot_status;

CAMOT_API const char* camot_version(void);
CAMOT_API const char* camot_status_name(camot_status status);

/* Message of the last failure on this thread; empty string if none. */
CAMOT_API const char* camot_last_error(void);

CAMOT_API void camot_string_free(char* s);

/* ---- parameters (opaque handle) ---------------------------------------- */

typedef struct camot_params camot_params;

CAMOT_API camot_status camot_params_create(camot_params** out);
CAMOT_API camot_status camot_params_load(const char* path, camot_params** out);
CAMOT_API camot_status camot_params_save(const camot_params* params,
                                         const char* path);
/* Merges a JSON document of dotted overrides, e.g.
 * {"inference.w_min": 2.0, "tracker.gate": 0.1}. */
CAMOT_API camot_status camot_params_override(camot_params* params,
                                             const char* json_overrides);
CAMOT_API camot_status camot_params_to_json(const camot_params* params,
                                            char** json_out);
CAMOT_API void camot_params_destroy(camot_params* params);

/* ---- pipeline ----------------------------------------------------------- */

/* Tracks one sequence directory and writes the tracks JSONL file.
 * params may be NULL (defaults); diagnostics_out may be NULL. */
CAMOT_API camot_status camot_track(const char* sequence_dir,
                                   const camot_params* params,
                                   const char* tracks_out,
                                   const char* diagnostics_out, int workers);

/* Evaluates a tracks file against ground truth with the CLEAR MOT metrics.
 * config_path may be NULL (defaults). The JSON report is returned through
 * report_json_out and optionally written to report_out (may be NULL). */
CAMOT_API camot_status camot_evaluate(const char* tracks_path,
                                      const char* gt_path,
                                      const char* config_path,
                                      const char* report_out,
                                      char** report_json_out);

/* Renders the evaluation report as a plain-text table. */
CAMOT_API camot_status camot_report_table(const char* report_json,
                                          char** table_out);

/* Runs the two-stage random-search tuner described by a tune-spec file and
 * writes the best parameter file. trial_log_out may be NULL. */
CAMOT_API camot_status camot_tune(const char* spec_path,
                                  const char* params_out,
                                  const char* trial_log_out);

/* Generates a synthetic sequence. scenario is a catalog name
 * ("single-static", "two-crossing", "occlusion-gap", "clutter-storm") or a
 * path to a scenario JSON file. */
CAMOT_API camot_status camot_synth(const char* scenario, const char* out_dir);

/* Writes per-frame mask-overlay images (PPM) for inspection. */
CAMOT_API camot_status camot_render(const char* sequence_dir,
                                    const char* tracks_path,
                                    const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CAMOT_H */
