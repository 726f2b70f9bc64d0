#ifndef MVPERIODIC_H
#define MVPERIODIC_H

/* C interface to the periodic mean-field SDE experiment engine.
 *
 * Every entry point returns MVP_OK (0) or a nonzero error code; the matching
 * human-readable message for the calling thread is available through
 * mvp_last_error_message(). Result handles are opaque and must be released
 * with mvp_result_free(). Strings returned from a result handle stay valid
 * until that handle is freed.
 */

#ifdef __cplusplus
extern "C" {
#endif

enum {
  MVP_OK = 0,
  MVP_E_DOMAIN = 1,
  MVP_E_MISSING_STATS = 2,
  MVP_E_EMPTY_ENSEMBLE = 3,
  MVP_E_NOT_CONTRACTIVE = 4,
  MVP_E_NO_ADMISSIBLE_K2 = 5,
  MVP_E_DIVERGENCE = 6,
  MVP_E_WRONG_REGIME = 7,
  MVP_E_SIZE_MISMATCH = 8,
  MVP_E_DIMENSION = 9,
  MVP_E_CAP_EXCEEDED = 10,
  MVP_E_NON_POSITIVE_VALUE = 11,
  MVP_E_GRID_NOT_ALIGNED = 12,
  MVP_E_PARSE = 13,
  MVP_E_VALIDATION = 14,
  MVP_E_IO = 15,
  MVP_E_INTERNAL = 16
};

enum { MVP_VERDICT_PASS = 0, MVP_VERDICT_FAIL = 1, MVP_VERDICT_INCONCLUSIVE = 2 };

typedef struct mvp_result mvp_result;

/* Runs the experiment described by a config file (INI text or an emitted
 * manifest.json). out_dir_override may be NULL to use the configured output
 * directory. On MVP_OK, *out receives a result handle. */
int mvp_run_config_file(const char* path, const char* out_dir_override, mvp_result** out);

/* Same, but the config text is passed directly. */
int mvp_run_config_text(const char* text, const char* out_dir_override, mvp_result** out);

/* MVP_VERDICT_*; -1 for a NULL handle. */
int mvp_result_verdict(const mvp_result* r);
double mvp_result_runtime_seconds(const mvp_result* r);
const char* mvp_result_experiment(const mvp_result* r);
const char* mvp_result_scenario(const mvp_result* r);
/* Path of the written report.json; empty when JSON emission was disabled. */
const char* mvp_result_report_path(const mvp_result* r);

/* Looks up a numeric report detail by key; MVP_E_VALIDATION when absent. */
int mvp_result_detail(const mvp_result* r, const char* key, double* value);

void mvp_result_free(mvp_result* r);

/* NULL-terminated-free name listing: *count receives the number of built-in
 * scenarios; release the array with mvp_free_names(). */
const char** mvp_list_scenarios(int* count);
void mvp_free_names(const char** names, int count);

/* Runs the acceptance suite, writing artifacts under out_dir (may be NULL).
 * workers = 0 resolves from MVP_WORKERS and hardware. *n_passed and *n_total
 * receive criterion counts. Returns MVP_OK even when criteria fail; nonzero
 * only for infrastructure errors. */
int mvp_verify_all(const char* out_dir, int workers, int* n_passed, int* n_total);

/* Message for the most recent failing call on this thread ("" if none). */
const char* mvp_last_error_message(void);

const char* mvp_version(void);

#ifdef __cplusplus
}
#endif

#endif /* MVPERIODIC_H */
