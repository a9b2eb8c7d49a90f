/* C interface to the self-refine engine: opaque handles, status codes, and
 * JSON strings at the boundary. Every char** output is heap-allocated by the
 * library and must be released with sr_string_free. All functions are
 * thread-safe; sr_last_error reports the calling thread's most recent
 * failure message. */
#ifndef SELFREFINE_H
#define SELFREFINE_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sr_status {
    SR_OK = 0,
    SR_ERR_INVALID_ARGUMENT = 1,
    SR_ERR_TEMPLATE = 2,
    SR_ERR_PARSE = 3,
    SR_ERR_UNPARSEABLE_VERDICT = 4,
    SR_ERR_AUTH = 5,
    SR_ERR_TRANSPORT = 6,
    SR_ERR_PROTOCOL = 7,
    SR_ERR_CACHE = 8,
    SR_ERR_EXTRACTION = 9,
    SR_ERR_DOMAIN = 10,
    SR_ERR_IO = 11,
    SR_ERR_CONFIG = 12,
    SR_ERR_INTERNAL = 13
} sr_status;

const char* sr_version(void);

/* Message for the current thread's last failed call; never NULL. The buffer
 * stays valid until this thread's next failing call. */
const char* sr_last_error(void);

void sr_string_free(char* s);

/* --- task registry ------------------------------------------------------ */

typedef struct sr_registry sr_registry;

/* Loads the built-in tasks with prompt bodies from prompt_dir. */
sr_status sr_registry_open(const char* prompt_dir, sr_registry** out);
void sr_registry_close(sr_registry* registry);

/* JSON array of task id strings. */
sr_status sr_registry_task_ids(sr_registry* registry, char** json_out);

/* JSON summary of one task: id, display name, metric, stop policy, rubric. */
sr_status sr_registry_task(sr_registry* registry, const char* task_id, char** json_out);

/* --- refinement sessions ------------------------------------------------ */

/* Runs one generate/feedback/refine session described by a JSON document:
 *   { "task": id, "prompt_dir": dir, "input": text,
 *     "concepts": [..]?, "gold_answer": text?,
 *     "replies": [..],           scripted replies, one queue for all roles
 *     "feedback_mode": "specific"|"generic"|"none"?,
 *     "generic_feedback": text?, "max_iterations": n?, "min_total_score": n?,
 *     "cache_dir": dir?, "cache_read_only": bool? }
 * Yields the full trace as JSON (one session, not written to disk).
 * Endpoint-backed sessions go through sr_run_batch with named profiles. */
sr_status sr_run_session(const char* session_json, char** trace_json_out);

/* Runs a whole dataset and appends one trace line per instance; config keys
 * mirror the CLI run flags: task, input, trace, backend_init, backend_feedback,
 * backend_refine, profiles, prompt_dir, max_iterations, min_total_score,
 * feedback_mode, generic_feedback, exec_oracle, workers, cache_dir,
 * cache_read_only, seed. Yields {"instances", "errors", "fingerprint"}. */
sr_status sr_run_batch(const char* config_json, char** outcome_json_out);

/* Evaluation over trace files; config keys mirror the CLI eval flags:
 * mode (coverage|rubric|ab|wilson|deltas|one_vs_k|report), traces: [..],
 * allow_mixed, z, successes, n, evaluator, profiles, prompt_dir, samples,
 * cache_dir, cache_read_only, both_wins, context. Yields the mode's report. */
sr_status sr_eval(const char* config_json, char** report_json_out);

/* Console rendering of an sr_eval report. */
sr_status sr_render_table(const char* report_json, char** table_out);

/* --- scoring and parsing primitives -------------------------------------- */

/* Wilson score interval for successes/trials at critical value z. */
sr_status sr_wilson_interval(long successes, long trials, double z, double* low_out,
                             double* high_out);

/* Fraction of concepts (JSON array of strings) whose stems occur in the
 * sentence. */
sr_status sr_coverage(const char* concepts_json, const char* sentence, double* coverage_out);

/* Comment density and structure counts for program text. */
sr_status sr_readability_metrics(const char* source, double* comments_per_line_out,
                                 int* function_units_out, int* non_blank_lines_out,
                                 int* comment_count_out);

/* found_out = 1 iff the text contains any stop phrase. phrases_json may be
 * NULL for the built-in phrase list. */
sr_status sr_detect_stop_phrase(const char* text, const char* phrases_json, int* found_out);

/* Parses a pairwise judgment. verdict_out is one of "A", "B", "both",
 * "neither"; unparseable_out = 1 when no verdict sentence was found (the
 * verdict is then "neither"). */
sr_status sr_parse_preference_verdict(const char* text, const char* label_a, const char* label_b,
                                      char** verdict_out, int* unparseable_out);

/* Parses rubric-scored feedback. rubric_json: [{"name", "max"}, ..]. Yields
 * {"aspects": [{"name","score","max"}], "total"?, "stop", "all_parsed",
 *  "effective_total"?}. */
sr_status sr_parse_scored_feedback(const char* text, const char* rubric_json,
                                   char** report_json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SELFREFINE_H */
