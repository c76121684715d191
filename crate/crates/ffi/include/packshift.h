#ifndef PACKSHIFT_H
#define PACKSHIFT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every exported function.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or trace line.
   */
  PS_STATUS_PARSE = 3,
  /**
   * Rejected configuration.
   */
  PS_STATUS_CONFIG = 4,
  /**
   * Event inconsistent with the trace so far, or an unsupported item.
   */
  PS_STATUS_INPUT = 5,
  /**
   * Offline repacking or another internal step failed.
   */
  PS_STATUS_INTERNAL = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

/**
 * Opaque runner handle.
 */
typedef struct PsRunner PsRunner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a runner from a JSON configuration such as
 * `{"epsilon":"1/10","online":{"name":"shelf-2d"},"check":true}`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PsStatus ps_runner_new(const char *config_json, struct PsRunner **out);

/**
 * Releases a runner. Accepts null.
 *
 * # Safety
 * `runner` must come from [`ps_runner_new`] and not be used afterwards.
 */
void ps_runner_free(struct PsRunner *runner);

/**
 * Applies one event, given as a trace line, and writes the step
 * diagnostics as a JSON object to `out`.
 *
 * # Safety
 * `runner` must be live, `event_json` NUL-terminated, `out` valid.
 */
enum PsStatus ps_runner_step(struct PsRunner *runner, const char *event_json, char **out);

/**
 * Writes the current cost, ghosts included, as `"p/q"`.
 *
 * # Safety
 * `runner` must be live and `out` valid.
 */
enum PsStatus ps_runner_cost(const struct PsRunner *runner, char **out);

/**
 * Writes the current solution as JSON.
 *
 * # Safety
 * `runner` must be live and `out` valid.
 */
enum PsStatus ps_runner_solution(const struct PsRunner *runner, char **out);

/**
 * Number of monitor violations recorded so far.
 *
 * # Safety
 * `runner` must be live and `out` valid.
 */
enum PsStatus ps_runner_violations(const struct PsRunner *runner, size_t *out);

/**
 * Releases a string returned by this library. Accepts null.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ps_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on this thread.
 */
const char *ps_last_error(void);

/**
 * Library version as a static string.
 */
const char *ps_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACKSHIFT_H */
