#ifndef AGENTLINK_H
#define AGENTLINK_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlDecision {
  AL_DECISION_ALLOW = 0,
  AL_DECISION_DENY = 1,
  AL_DECISION_NEEDS_CONSENT = 2,
} AlDecision;

typedef enum AlEvent {
  AL_EVENT_START_WORK = 0,
  AL_EVENT_NEED_INPUT = 1,
  /**
   * Takes the new message text.
   */
  AL_EVENT_PROVIDE_INPUT = 2,
  AL_EVENT_COMPLETE = 3,
  /**
   * Takes an optional reason.
   */
  AL_EVENT_FAIL = 4,
  AL_EVENT_CANCEL_REQUESTED = 5,
  AL_EVENT_MARK_UNKNOWN = 6,
} AlEvent;

typedef enum AlStatus {
  AL_STATUS_OK = 0,
  AL_STATUS_NULL_ARGUMENT = 1,
  AL_STATUS_INVALID_UTF8 = 2,
  AL_STATUS_INVALID_ARGUMENT = 3,
  AL_STATUS_ILLEGAL_TRANSITION = 4,
  AL_STATUS_FAILED = 5,
  AL_STATUS_PANIC = 6,
} AlStatus;

typedef enum AlTaskState {
  AL_TASK_STATE_SUBMITTED = 0,
  AL_TASK_STATE_WORKING = 1,
  AL_TASK_STATE_INPUT_REQUIRED = 2,
  AL_TASK_STATE_COMPLETED = 3,
  AL_TASK_STATE_FAILED = 4,
  AL_TASK_STATE_CANCELED = 5,
  AL_TASK_STATE_UNKNOWN = 6,
} AlTaskState;

/**
 * A set of pinned tool definitions.
 */
typedef struct AlPinSet AlPinSet;

/**
 * An A2A task and its lifecycle.
 */
typedef struct AlTask AlTask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string that must not be freed.
 */
const char *al_version(void);

/**
 * Copy of the last error message on this thread, or null if none.
 */
char *al_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void al_string_free(char *s);

/**
 * Creates a task in state submitted. The id comes from a generator seeded with `seed`.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings; `out` must be writable.
 */
enum AlStatus al_task_new(const char *skill_id,
                          const char *text,
                          uint64_t seed,
                          struct AlTask **out);

/**
 * # Safety
 * `task` must come from [`al_task_new`] and must not be used afterwards. Null is ignored.
 */
void al_task_free(struct AlTask *task);

/**
 * Applies one lifecycle event. On an illegal event the task is left unchanged
 * and `AL_STATUS_ILLEGAL_TRANSITION` is returned.
 *
 * # Safety
 * `task` must be a live handle; `text` may be null or a valid string.
 */
enum AlStatus al_task_apply(struct AlTask *task, enum AlEvent event, const char *text);

/**
 * # Safety
 * `task` must be a live handle and `out` writable.
 */
enum AlStatus al_task_state(const struct AlTask *task, enum AlTaskState *out);

/**
 * Canonical JSON snapshot of the task.
 *
 * # Safety
 * `task` must be a live handle and `out` writable.
 */
enum AlStatus al_task_snapshot(const struct AlTask *task, char **out);

/**
 * Validates an agent card and writes its canonical form.
 *
 * # Safety
 * `json` must be a valid string and `out` writable.
 */
enum AlStatus al_card_validate(const char *json, char **out);

/**
 * Writes a JSON array of every violation of `schema` by `instance`; empty when it conforms.
 *
 * # Safety
 * Both inputs must be valid strings and `out` writable.
 */
enum AlStatus al_schema_violations(const char *schema_json, const char *instance_json, char **out);

/**
 * Reads a pin file (one pin per line).
 *
 * # Safety
 * `jsonl` must be a valid string and `out` writable.
 */
enum AlStatus al_pins_parse(const char *jsonl, struct AlPinSet **out);

/**
 * # Safety
 * `pins` must come from [`al_pins_parse`] and must not be used afterwards. Null is ignored.
 */
void al_pins_free(struct AlPinSet *pins);

/**
 * Checks a tool definition against its pin. Unpinned tools are denied.
 *
 * # Safety
 * `pins` must be a live handle, strings valid, `out` writable.
 */
enum AlStatus al_pins_evaluate(const struct AlPinSet *pins,
                               const char *server,
                               const char *tool_json,
                               enum AlDecision *out);

/**
 * Runs a bundled scenario and writes its report as JSON. A scenario that
 * ends in failure still returns `AL_STATUS_OK`; the report says how it ended.
 *
 * # Safety
 * `name` must be a valid string, `consent` null or a valid string such as `"y,n"`, `out` writable.
 */
enum AlStatus al_scenario_run(const char *name, uint64_t seed, const char *consent, char **out);

/**
 * Classifies a JSONL trace, writing a name such as `"mcp-tool-error"` or `"none"`.
 *
 * # Safety
 * `jsonl` must be a valid string and `out` writable.
 */
enum AlStatus al_trace_classify(const char *jsonl, char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* AGENTLINK_H */
