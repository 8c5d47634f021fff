#ifndef HYDROSIM_H
#define HYDROSIM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  HS_STATUS_CONFIG_INVALID = 3,
  HS_STATUS_MAP_LOAD_FAILED = 4,
  HS_STATUS_LOG_CORRUPT = 5,
  HS_STATUS_BAD_COMMAND = 6,
  HS_STATUS_BAD_FRAME = 7,
  HS_STATUS_BUFFER_TOO_SMALL = 8,
  HS_STATUS_FINISHED = 9,
  HS_STATUS_PANIC = 10,
} HsStatus;

typedef enum HsTermination {
  HS_TERMINATION_RUNNING = 0,
  HS_TERMINATION_MISSION_SUCCESS = 1,
  HS_TERMINATION_MISSION_FAILURE = 2,
  HS_TERMINATION_DEPLETED = 3,
  HS_TERMINATION_MAX_DURATION = 4,
} HsTermination;

/**
 * Opaque simulation handle.
 */
typedef struct HsSim HsSim;

/**
 * Vehicle state after the latest tick.
 */
typedef struct HsSnapshot {
  double t;
  double x;
  double y;
  double theta;
  double est_x;
  double est_y;
  double est_theta;
  double soc_wh;
  double station_distance;
  /**
   * 0 auto, 1 manual, 2 e-stopped
   */
  uint8_t mode;
  uint8_t mission_state;
} HsSnapshot;

typedef struct HsDelivery {
  bool delivered;
  /**
   * Seconds; zero when dropped.
   */
  double latency;
} HsDelivery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *hs_last_error(void);

/**
 * Builds a simulation from scenario JSON. Relative paths inside the
 * scenario resolve against `base_dir`, which may be null for the current
 * directory.
 *
 * # Safety
 * `json` and `base_dir` must be null or NUL-terminated; `out` must be writable.
 */
enum HsStatus hs_sim_new(const char *json, const char *base_dir, struct HsSim **out);

/**
 * # Safety
 * `sim` must come from [`hs_sim_new`] and not be used afterwards. Null is a no-op.
 */
void hs_sim_free(struct HsSim *sim);

/**
 * Advances up to `ticks` ticks. Returns `Finished` once the run has ended,
 * with `*termination` set either way.
 *
 * # Safety
 * `sim` must be a live handle; `snap` and `termination` may be null.
 */
enum HsStatus hs_sim_step(struct HsSim *sim,
                          uint32_t ticks,
                          struct HsSnapshot *snap,
                          enum HsTermination *termination);

/**
 * Runs to termination.
 *
 * # Safety
 * `sim` must be a live handle; `snap` and `termination` may be null.
 */
enum HsStatus hs_sim_run(struct HsSim *sim,
                         struct HsSnapshot *snap,
                         enum HsTermination *termination);

/**
 * Sends an operator command as JSON (`{"type":"estop","engage":true}`,
 * `{"type":"command",...}` or `{"type":"motor_command",...}`) over the
 * simulated uplink at the current station distance.
 *
 * # Safety
 * `sim` must be a live handle, `json` NUL-terminated, `out` null or writable.
 */
enum HsStatus hs_sim_command(struct HsSim *sim, const char *json, struct HsDelivery *out);

/**
 * Writes the 64 hex digits of the log hash so far plus a NUL into `buf`.
 *
 * # Safety
 * `sim` must be a live handle and `buf` hold `cap` bytes.
 */
enum HsStatus hs_sim_log_hash(const struct HsSim *sim, char *buf, size_t cap);

/**
 * Metrics for the log so far as JSON. Free with [`hs_string_free`].
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum HsStatus hs_sim_metrics_json(const struct HsSim *sim, char **out);

/**
 * The full JSONL log so far. Free with [`hs_string_free`].
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum HsStatus hs_sim_log(const struct HsSim *sim, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is a no-op.
 */
void hs_string_free(char *s);

/**
 * Frames a JSON message. `*written` receives the frame length, or the
 * required length when the buffer is too small.
 *
 * # Safety
 * `json` NUL-terminated; `buf` holds `cap` bytes; `written` writable.
 */
enum HsStatus hs_frame_encode(const char *json,
                              uint16_t seq,
                              uint8_t *buf,
                              size_t cap,
                              size_t *written);

/**
 * Decodes one frame into its sequence number and JSON message. Free the
 * string with [`hs_string_free`].
 *
 * # Safety
 * `buf` holds `len` bytes; `seq` and `json_out` writable.
 */
enum HsStatus hs_frame_decode(const uint8_t *buf, size_t len, uint16_t *seq, char **json_out);

/**
 * Minutes of operation from `energy_wh` at a constant `power_w`.
 *
 * # Safety
 * `minutes` must be writable.
 */
enum HsStatus hs_endurance_minutes(double energy_wh, double power_w, double *minutes);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HYDROSIM_H */
