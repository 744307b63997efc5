#ifndef CHART_REWARD_H
#define CHART_REWARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible call.
 */
typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_UTF8 = 2,
  CR_STATUS_PARSE = 3,
  CR_STATUS_VALIDATION = 4,
  CR_STATUS_USAGE = 5,
  CR_STATUS_CONFIG = 6,
  CR_STATUS_INFRASTRUCTURE = 7,
  CR_STATUS_IO = 8,
  CR_STATUS_PANIC = 9,
} CrStatus;

/**
 * Opaque parsed Chart JSON document.
 */
typedef struct CrChartDocument CrChartDocument;

/**
 * Opaque reward configuration.
 */
typedef struct CrRewardConfig CrRewardConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * call into this library from the same thread; never null.
 */
const char *cr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cr_version(void);

/**
 * Parse and validate Chart JSON bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` to writable storage
 * for one pointer.
 */
enum CrStatus cr_chart_document_parse(const uint8_t *data,
                                      size_t len,
                                      struct CrChartDocument **out);

/**
 * Serialize a document to canonical Chart JSON. Free the result with
 * [`cr_string_free`].
 *
 * # Safety
 * `doc` must be a live handle and `out` writable.
 */
enum CrStatus cr_chart_document_serialize(const struct CrChartDocument *doc, char **out);

/**
 * Number of graphical and text objects in a document.
 *
 * # Safety
 * `doc` must be a live handle; the count pointers may be null.
 */
enum CrStatus cr_chart_document_counts(const struct CrChartDocument *doc,
                                       size_t *graphical,
                                       size_t *texts);

/**
 * # Safety
 * `doc` must be null or a handle from [`cr_chart_document_parse`] that has
 * not been freed.
 */
void cr_chart_document_free(struct CrChartDocument *doc);

/**
 * Default reward configuration.
 */
struct CrRewardConfig *cr_config_new_default(void);

/**
 * Reward configuration from a JSON config file body.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum CrStatus cr_config_from_json(const char *json, struct CrRewardConfig **out);

/**
 * # Safety
 * `cfg` must be null or a live config handle.
 */
void cr_config_free(struct CrRewardConfig *cfg);

/**
 * Layout metric L_R of `pred` against `gt`, in `[0, 1]`.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum CrStatus cr_layout_metric(const struct CrChartDocument *pred,
                               const struct CrChartDocument *gt,
                               const struct CrRewardConfig *cfg,
                               double *out);

/**
 * Text metric T_R of `pred` against `gt`, in `[0, 1]`.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum CrStatus cr_text_metric(const struct CrChartDocument *pred,
                             const struct CrChartDocument *gt,
                             const struct CrRewardConfig *cfg,
                             double *out);

/**
 * Rendering reward, zero unless `exec` is 1.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum CrStatus cr_rendering_reward(const struct CrChartDocument *pred,
                                  const struct CrChartDocument *gt,
                                  uint8_t exec,
                                  const struct CrRewardConfig *cfg,
                                  double *out);

/**
 * Format reward of a raw response. On score 1, `*code` receives the
 * extracted code (free with [`cr_string_free`]); otherwise it is set to null.
 *
 * # Safety
 * `response` must be NUL-terminated; `score` and `code` writable.
 */
enum CrStatus cr_format_reward(const char *response, uint8_t *score, char **code);

double cr_total_reward(uint8_t format, double render);

/**
 * Z-score `n` rewards into `out` (room for `n` doubles).
 *
 * # Safety
 * `rewards` must hold `n` doubles, `out` must have room for `n`, `cfg` live.
 */
enum CrStatus cr_group_advantages(const double *rewards,
                                  size_t n,
                                  const struct CrRewardConfig *cfg,
                                  double *out);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHART_REWARD_H */
