#ifndef PIPEFORGE_PIPEFORGE_H
#define PIPEFORGE_PIPEFORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PF_API __declspec(dllexport)
#else
#define PF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pf_status {
  PF_OK = 0,
  PF_ERR_INVALID_ARGUMENT = 1,
  PF_ERR_IO = 2,
  PF_ERR_PARSE = 3,
  PF_ERR_CATALOG = 4,
  PF_ERR_UNKNOWN_PRIMITIVE = 5,
  PF_ERR_ILLEGAL_ACTION = 6,
  PF_ERR_TERMINAL_STATE = 7,
  PF_ERR_SHAPE = 8,
  PF_ERR_NUMERIC = 9,
  PF_ERR_DATASET = 10,
  PF_ERR_EVALUATOR = 11,
  PF_ERR_REPLAY = 12,
  PF_ERR_BUFFER_TOO_SMALL = 13,
  PF_ERR_INTERNAL = 99
} pf_status;

/* Message of the last failed call on this thread; "" when none. */
PF_API const char* pf_last_error(void);
PF_API const char* pf_status_name(pf_status status);
PF_API const char* pf_version(void);

/* U = q + c * p * sqrt(n_s) / (1 + n_sa) */
PF_API double pf_puct_score(double q, double p, double n_s, double n_sa, double c);

/* ---- catalog ---------------------------------------------------------- */

typedef struct pf_catalog pf_catalog;

/* path == NULL loads the bundled default catalog. */
PF_API pf_status pf_catalog_load(const char* path, pf_catalog** out);
PF_API void pf_catalog_free(pf_catalog* catalog);
PF_API size_t pf_catalog_size(const pf_catalog* catalog);
/* Valid while the handle lives. */
PF_API const char* pf_catalog_hash(const pf_catalog* catalog);
PF_API const char* pf_catalog_id(const pf_catalog* catalog, size_t ordinal);
/* Grammar check; task_kind < 0 skips task compatibility. On PF_OK *valid
   is 1 or 0. */
PF_API pf_status pf_catalog_validate(const pf_catalog* catalog, const char* const* ids, size_t count,
                                     int max_length, int task_kind, int* valid);

/* ---- game state --------------------------------------------------------- */

typedef struct pf_state pf_state;

/* task_kind: 0 binary, 1 multiclass, 2 regression. meta may be NULL (zeros),
   otherwise 16 values. The catalog must outlive the state. */
PF_API pf_status pf_state_new(const pf_catalog* catalog, const double* meta, int task_kind, int max_length,
                              int max_moves, pf_state** out);
PF_API void pf_state_free(pf_state* state);
PF_API size_t pf_state_action_count(const pf_state* state);
PF_API int pf_state_is_terminal(const pf_state* state);
PF_API int pf_state_is_committed(const pf_state* state);
PF_API int pf_state_move_count(const pf_state* state);
PF_API size_t pf_state_length(const pf_state* state);
/* Ordinal at a pipeline position, -1 when out of range. */
PF_API int pf_state_primitive(const pf_state* state, size_t position);
/* mask must hold pf_state_action_count() bytes. */
PF_API pf_status pf_state_legal(const pf_state* state, uint8_t* mask, size_t capacity);
PF_API pf_status pf_state_apply(pf_state* state, size_t action);
/* width == 19 + max_length */
PF_API pf_status pf_state_encode(const pf_state* state, double* out, size_t capacity, size_t* width);

/* ---- datasets and evaluation ------------------------------------------- */

typedef struct pf_dataset pf_dataset;

/* task: path to a task JSON file or inline JSON. */
PF_API pf_status pf_dataset_load(const char* csv_path, const char* task, pf_dataset** out);
PF_API void pf_dataset_free(pf_dataset* dataset);
PF_API size_t pf_dataset_rows(const pf_dataset* dataset);
PF_API size_t pf_dataset_class_count(const pf_dataset* dataset);
PF_API pf_status pf_dataset_meta_features(const pf_dataset* dataset, double* out16);

typedef struct pf_eval_result {
  double e;
  double raw_metric;
  int status; /* 0 ok, 1 invalid_pipeline, 2 runtime_failure */
} pf_eval_result;

PF_API pf_status pf_evaluate(const pf_catalog* catalog, const pf_dataset* dataset, const char* const* ids,
                             size_t count, int folds, uint64_t seed, pf_eval_result* out);
PF_API pf_status pf_baseline_sgd(const pf_dataset* dataset, int folds, uint64_t seed, pf_eval_result* out);

/* ---- network ----------------------------------------------------------- */

typedef struct pf_net pf_net;

PF_API pf_status pf_net_random(const pf_catalog* catalog, int max_length, size_t embed, size_t hidden,
                               uint64_t seed, pf_net** out);
/* catalog may be NULL to skip the hash check. */
PF_API pf_status pf_net_load(const char* path, const pf_catalog* catalog, pf_net** out);
PF_API pf_status pf_net_save(const pf_net* net, const pf_catalog* catalog, const char* path);
PF_API void pf_net_free(pf_net* net);
PF_API size_t pf_net_parameter_count(const pf_net* net);
/* probs must hold the action count of the state. */
PF_API pf_status pf_net_predict(const pf_net* net, const pf_state* state, double* probs, size_t capacity,
                                double* value);

/* ---- commands ---------------------------------------------------------- */

typedef void (*pf_line_fn)(const char* line, void* user);

typedef struct pf_command_options {
  const char* config;
  const char* checkpoint;
  const char* dataset;
  const char* task;
  const char* catalog;
  const char* out_dir;
  const char* trace;
  uint64_t seed;
  int has_seed;
  int simulations; /* <= 0 keeps the default */
  int games;
  int iterations; /* < 0 keeps the default; 0 is a valid value */
  int folds;
} pf_command_options;

PF_API void pf_command_options_init(pf_command_options* options);

/* Each writes its exit code (0 ok, 1 task failure, 2 usage/IO) to
   *exit_code; out receives result lines and err diagnostics. */
PF_API pf_status pf_cmd_selfplay(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                                 int* exit_code);
PF_API pf_status pf_cmd_search(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                               int* exit_code);
PF_API pf_status pf_cmd_explain(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                                int* exit_code);
PF_API pf_status pf_cmd_benchmark(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                                  int* exit_code);

#ifdef __cplusplus
}
#endif

#endif
