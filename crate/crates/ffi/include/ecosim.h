#ifndef ECOSIM_H
#define ECOSIM_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum EcoStatus {
  ECO_STATUS_OK = 0,
  ECO_STATUS_NULL_POINTER = 1,
  ECO_STATUS_INVALID_UTF8 = 2,
  ECO_STATUS_CONFIG = 3,
  ECO_STATUS_RUNTIME = 4,
  ECO_STATUS_FINISHED = 5,
} EcoStatus;

/**
 * Scenario configuration.
 */
typedef struct EcoConfig EcoConfig;

/**
 * Parsed semantic filter map.
 */
typedef struct EcoFilterMap EcoFilterMap;

/**
 * A simulation run in progress.
 */
typedef struct EcoSimulation EcoSimulation;

/**
 * One request event of a run.
 */
typedef struct EcoStepRecord {
  uint64_t step;
  size_t user;
  double match_percent;
  size_t generations;
} EcoStepRecord;

/**
 * One attribute tuple, both fields in 1..=100.
 */
typedef struct EcoTuple {
  uint8_t id;
  uint8_t value;
} EcoTuple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *eco_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed yet.
 */
void eco_string_free(char *s);

/**
 * Default configuration (baseline scenario).
 */
struct EcoConfig *eco_config_new(void);

/**
 * # Safety
 * `cfg` must be null or a handle from [`eco_config_new`] not yet freed.
 */
void eco_config_free(struct EcoConfig *cfg);

/**
 * Sets one configuration key, with the same keys and value syntax as the
 * config file.
 *
 * # Safety
 * `cfg` must be a live config handle; `key` and `value` NUL-terminated.
 */
enum EcoStatus eco_config_set(struct EcoConfig *cfg, const char *key, const char *value);

/**
 * Applies a whole `key = value` config text.
 *
 * # Safety
 * `cfg` must be a live config handle; `text` NUL-terminated.
 */
enum EcoStatus eco_config_apply(struct EcoConfig *cfg, const char *text);

/**
 * Starts run `run` of the configured scenario and writes the handle to
 * `out`.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a writable pointer.
 */
enum EcoStatus eco_simulation_new(const struct EcoConfig *cfg,
                                  size_t run,
                                  struct EcoSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`eco_simulation_new`] not yet freed.
 */
void eco_simulation_free(struct EcoSimulation *sim);

/**
 * Runs one request event. Returns `ECO_STATUS_FINISHED` once the configured
 * number of steps has been run. `record` may be null.
 *
 * # Safety
 * `sim` must be a live simulation handle; `record` null or writable.
 */
enum EcoStatus eco_simulation_step(struct EcoSimulation *sim, struct EcoStepRecord *record);

/**
 * Mean match percent over the last 100 steps run so far (fewer if the run
 * is shorter).
 *
 * # Safety
 * `sim` must be a live simulation handle and `out` writable.
 */
enum EcoStatus eco_simulation_final_rate(const struct EcoSimulation *sim, double *out);

/**
 * Agent instances currently hosted across all habitats.
 *
 * # Safety
 * `sim` must be a live simulation handle.
 */
size_t eco_simulation_instances(const struct EcoSimulation *sim);

/**
 * Topology snapshot as CSV (`from,to,p_forward,p_backward`). Free the
 * result with [`eco_string_free`].
 *
 * # Safety
 * `sim` must be a live simulation handle and `out` writable.
 */
enum EcoStatus eco_simulation_topology(const struct EcoSimulation *sim, char **out);

/**
 * Scenario name for `index` in 0..5, or null.
 */
const char *eco_scenario_name(size_t index);

/**
 * Raw match fitness of `attrs` against `request`, in (0, 1].
 *
 * # Safety
 * `attrs` and `request` must point to `n_attrs` and `n_request` tuples;
 * `out` must be writable.
 */
enum EcoStatus eco_fitness(const struct EcoTuple *attrs,
                           size_t n_attrs,
                           const struct EcoTuple *request,
                           size_t n_request,
                           double *out);

/**
 * Parses a filter map (`id<TAB>Label`, `id,value<TAB>Text` lines).
 *
 * # Safety
 * `text` must be NUL-terminated and `out` writable.
 */
enum EcoStatus eco_filter_map_parse(const char *text, struct EcoFilterMap **out);

/**
 * # Safety
 * `map` must be null or a handle from [`eco_filter_map_parse`] not yet freed.
 */
void eco_filter_map_free(struct EcoFilterMap *map);

/**
 * Renders one input line (a description or a request) through the map,
 * one output line per tuple group. Free the result with
 * [`eco_string_free`].
 *
 * # Safety
 * `map` must be a live handle, `line` NUL-terminated and `out` writable.
 */
enum EcoStatus eco_filter_render(const struct EcoFilterMap *map, const char *line, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECOSIM_H */
