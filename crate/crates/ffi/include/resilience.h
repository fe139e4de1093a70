#ifndef RESILIENCE_H
#define RESILIENCE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ResStatus {
  RES_STATUS_OK = 0,
  RES_STATUS_NULL_POINTER = 1,
  RES_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The window yields no record; the message names the reason.
   */
  RES_STATUS_NOT_COMPUTABLE = 3,
  /**
   * Configuration failed validation.
   */
  RES_STATUS_CONFIG = 4,
  /**
   * Input data could not be read or parsed.
   */
  RES_STATUS_DATA = 5,
  /**
   * A built panel violated an invariant.
   */
  RES_STATUS_INVARIANT = 6,
  RES_STATUS_IO = 7,
  RES_STATUS_OUT_OF_RANGE = 8,
  /**
   * A panic was caught at the boundary.
   */
  RES_STATUS_INTERNAL = 9,
} ResStatus;

typedef enum ResClass {
  RES_CLASS_LOW = 1,
  RES_CLASS_MEDIUM = 2,
  RES_CLASS_HIGH = 3,
} ResClass;

typedef enum ResReason {
  /**
   * The row is computed.
   */
  RES_REASON_NONE = 0,
  RES_REASON_INSUFFICIENT_REFERENCE = 1,
  RES_REASON_INSUFFICIENT_PERFORMANCE = 2,
  RES_REASON_GAP_AT_SHOCK = 3,
  RES_REASON_NO_DATA = 4,
  RES_REASON_DEGENERATE_LEVELS = 5,
} ResReason;

/**
 * Opaque panel handle.
 */
typedef struct ResPanel ResPanel;

typedef struct ResRecord {
  double r_en;
  double r_ec;
  double r_ev;
  /**
   * +1 or -1.
   */
  int8_t direction;
  double i_r;
  enum ResClass class_;
} ResRecord;

/**
 * One panel row. `record` is meaningful only when `reason` is `None`.
 */
typedef struct ResRow {
  int32_t shock_year;
  enum ResReason reason;
  struct ResRecord record;
} ResRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *res_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *res_version(void);

/**
 * Computes the record for one window given as its reference values (up to
 * and including the shock year) and performance values. `as_printed`
 * selects the alternative sign convention for the ecological component.
 */
enum ResStatus res_compute_record(const double *reference,
                                  size_t reference_len,
                                  const double *performance,
                                  size_t performance_len,
                                  bool as_printed,
                                  struct ResRecord *out);

enum ResStatus res_classify(double i_r, enum ResClass *out);

enum ResStatus res_t_quantile(double p, double df, double *out);

/**
 * Builds a panel from a run config file without touching the network.
 * Fetch sources must already be cached.
 */
enum ResStatus res_panel_from_config(const char *config_path, struct ResPanel **out);

/**
 * Loads a panel previously written as `panel.json`.
 */
enum ResStatus res_panel_from_json(const char *path, struct ResPanel **out);

enum ResStatus res_panel_row_count(const struct ResPanel *panel, size_t *out);

enum ResStatus res_panel_row(const struct ResPanel *panel, size_t index, struct ResRow *out);

/**
 * Country code of a row. The string is owned by the panel and lives until
 * [`res_panel_free`].
 */
enum ResStatus res_panel_row_country(const struct ResPanel *panel, size_t index, const char **out);

enum ResStatus res_panel_write_csv(const struct ResPanel *panel, const char *path);

/**
 * Releases a panel. NULL is ignored.
 */
void res_panel_free(struct ResPanel *panel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESILIENCE_H */
