#ifndef DESKRL_H
#define DESKRL_H

/* C interface to the trading research engine. Every fallible call returns a
 * status code; the message for the most recent failure on the calling thread
 * is available from drl_last_error(). The CLI maps these codes directly to
 * exit codes. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DRL_API __declspec(dllexport)
#else
#define DRL_API __attribute__((visibility("default")))
#endif

#define DRL_OK 0
#define DRL_ERR_VALIDATION 1 /* rejected input, config or argument */
#define DRL_ERR_RUNTIME 2    /* I/O or numeric failure */

/* Static version string. */
DRL_API const char* drl_version(void);

/* Message for the most recent failing call on this thread; empty string after
 * a success. Storage is owned by the library; do not free. */
DRL_API const char* drl_last_error(void);

/* Opaque run configuration. */
typedef struct drl_config drl_config;

/* Defaults plus key=value overrides; overrides may be NULL when n is 0.
 * On success *out owns a new handle, released with drl_config_free. */
DRL_API int drl_config_create(const char* const* overrides, size_t n_overrides,
                              drl_config** out);

/* Config file plus overrides, applied in order after the file. */
DRL_API int drl_config_load(const char* path, const char* const* overrides,
                            size_t n_overrides, drl_config** out);

DRL_API void drl_config_free(drl_config* cfg);

/* Canonical sorted text form; *out is heap-allocated, release with
 * drl_string_free. */
DRL_API int drl_config_dump(const drl_config* cfg, char** out);

/* Hash of the canonical form, as recorded in run manifests. */
DRL_API int drl_config_hash(const drl_config* cfg, uint64_t* out);

/* Commands. Artifacts land under the config's out_dir; see the CLI help for
 * the file list per command. */
DRL_API int drl_cmd_gen_data(const drl_config* cfg);
DRL_API int drl_cmd_train(const drl_config* cfg);
DRL_API int drl_cmd_backtest(const drl_config* cfg, const char* strategy);
DRL_API int drl_cmd_ensemble(const drl_config* cfg);
DRL_API int drl_cmd_explain(const drl_config* cfg, const char* checkpoint_path);
DRL_API int drl_cmd_report(const drl_config* cfg, const char* const* report_paths,
                           size_t n_reports);

DRL_API void drl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DESKRL_H */
