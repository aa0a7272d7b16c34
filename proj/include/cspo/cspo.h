/* C interface to the CSPO table toolkit.
 *
 * Every fallible call returns a cspo_status. On failure the message is
 * available from cspo_last_error_message() on the calling thread until the
 * next call on that thread. Output buffers are owned by the caller and must
 * be released with cspo_buffer_free(). A session is not thread-safe; the
 * stateless calls are.
 */
#ifndef CSPO_CSPO_H
#define CSPO_CSPO_H

#include <stddef.h>

#if defined(_WIN32)
#define CSPO_API __declspec(dllexport)
#else
#define CSPO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cspo_status {
  CSPO_OK = 0,
  CSPO_ERR_INVALID_ARGUMENT = 1,
  CSPO_ERR_IO = 2,
  CSPO_ERR_CONFIG = 3,
  CSPO_ERR_SCHEMA = 4,
  CSPO_ERR_UNRECOVERABLE_STRUCTURE = 5,
  CSPO_ERR_GROUP_TOO_SMALL = 6,
  CSPO_ERR_EMPTY_COMPONENT_SPAN = 7,
  CSPO_ERR_EXTERNAL_TOOL_UNAVAILABLE = 8,
  CSPO_ERR_JUDGE_UNREACHABLE = 9,
  CSPO_ERR_JUDGE_REPLY_UNPARSEABLE = 10,
  CSPO_ERR_INTERNAL = 11
} cspo_status;

/* Token kinds; the first seven are rewarded. CSPO_COMPONENT_GLOBAL indexes
 * the global pseudo-component in advantage arrays. */
typedef enum cspo_component {
  CSPO_COMPONENT_PKG = 0,
  CSPO_COMPONENT_CAP = 1,
  CSPO_COMPONENT_STRUCT = 2,
  CSPO_COMPONENT_CELL_APP = 3,
  CSPO_COMPONENT_ALIGN = 4,
  CSPO_COMPONENT_VLINE = 5,
  CSPO_COMPONENT_HLINE = 6,
  CSPO_COMPONENT_OTHER = 7,
  CSPO_COMPONENT_GLOBAL = 8
} cspo_component;

#define CSPO_NUM_COMPONENTS 9

typedef struct cspo_session cspo_session;
typedef struct cspo_buffer cspo_buffer;

CSPO_API const char* cspo_version(void);
CSPO_API const char* cspo_status_name(cspo_status status);
CSPO_API const char* cspo_last_error_message(void);

CSPO_API const char* cspo_buffer_data(const cspo_buffer* buffer);
CSPO_API size_t cspo_buffer_size(const cspo_buffer* buffer);
CSPO_API void cspo_buffer_free(cspo_buffer* buffer);

/* Sessions carry run configuration: objective weights, reward scheme,
 * judge mode, training and evaluation settings. */
CSPO_API cspo_status cspo_session_create(cspo_session** out);
CSPO_API void cspo_session_destroy(cspo_session* session);
/* Unknown keys fail with CSPO_ERR_CONFIG. */
CSPO_API cspo_status cspo_session_set(cspo_session* session, const char* key, const char* value);
CSPO_API cspo_status cspo_session_load_config(cspo_session* session, const char* path);
CSPO_API cspo_status cspo_session_validate(const cspo_session* session);
/* JSON snapshot of the effective configuration. */
CSPO_API cspo_status cspo_session_config_json(const cspo_session* session, cspo_buffer** out);

/* Span report JSON: {"tokens":[{"text","start","end","component"}],"counts":{...}}. */
CSPO_API cspo_status cspo_decompose(const char* source, size_t length, cspo_buffer** out);

/* Tree edit similarity. `out_json` may be NULL; otherwise it receives
 * {"teds","dist","pred_nodes","ref_nodes"}. */
CSPO_API cspo_status cspo_teds(const char* pred, size_t pred_length, const char* ref, size_t ref_length,
                               double* out_teds, cspo_buffer** out_json);

/* Component and global rewards under the session's scheme and judge:
 * {"scheme","components":{...},"teds","cmp","global","valid","reasons"}. */
CSPO_API cspo_status cspo_reward(cspo_session* session, const char* pred, size_t pred_length,
                                 const char* ref, size_t ref_length, cspo_buffer** out);

/* Evaluates a JSONL corpus of {"id","prediction","reference"} records.
 * `out_csv` may be NULL. */
CSPO_API cspo_status cspo_evaluate_corpus(cspo_session* session, const char* jsonl, size_t length,
                                          cspo_buffer** out_report, cspo_buffer** out_csv);

/* (R - mean) / (std + eps_norm) over n >= 2 rewards. */
CSPO_API cspo_status cspo_normalize(const double* rewards, size_t n, double eps_norm, double* out);

/* out[t] = advantage where membership[t] == component, else 0. */
CSPO_API cspo_status cspo_mask(double advantage, const int* membership, size_t n, int component,
                               double* out);

/* Aggregated token advantages for one rollout using the session's weights.
 * `component_advantages` has CSPO_NUM_COMPONENTS entries. */
CSPO_API cspo_status cspo_aggregate(const cspo_session* session, const int* membership, size_t n,
                                    const double* component_advantages, double* out);

/* Advantages for a rollout group given as JSON:
 * {"rollouts":[{"membership":["struct",...],"rewards":{"pkg":1,...},
 *   "global":1.5}]}. The session's mode selects cspo, grpo or comp_sum. */
CSPO_API cspo_status cspo_advantages(const cspo_session* session, const char* group_json, size_t length,
                                     cspo_buffer** out);

/* Runs the toy training simulation for every seed of the session.
 * Any output pointer may be NULL. */
CSPO_API cspo_status cspo_simulate_train(const cspo_session* session, cspo_buffer** out_records_jsonl,
                                         cspo_buffer** out_summary_json, cspo_buffer** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* CSPO_CSPO_H */
