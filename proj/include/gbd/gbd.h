/*
 * C interface to the graph backdoor detection library.
 *
 * Objects are opaque handles created by the *_load / *_create functions and
 * released with the matching *_free. Every function returns a gbd_status;
 * on failure gbd_last_error() describes the problem (thread-local, valid
 * until the next failing call on the same thread). Strings returned through
 * char** out-parameters are heap-allocated and owned by the caller, who
 * releases them with gbd_string_free.
 *
 * Configuration crosses the boundary as JSON text. The accepted keys are
 * listed with each function.
 */
#ifndef GBD_GBD_H
#define GBD_GBD_H

#include <stddef.h>
#include <stdint.h>

#if defined(GBD_BUILDING_LIBRARY)
#define GBD_API __attribute__((visibility("default")))
#else
#define GBD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gbd_status {
  GBD_OK = 0,
  GBD_ERR_INVALID_ARGUMENT = 1,
  GBD_ERR_LOAD = 2,
  GBD_ERR_FORMAT = 3,
  GBD_ERR_CONFIG = 4,
  GBD_ERR_NUMERIC = 5,
  GBD_ERR_PRECONDITION = 6,
  GBD_ERR_INTERNAL = 7
} gbd_status;

typedef struct gbd_dataset gbd_dataset;
typedef struct gbd_split gbd_split;
typedef struct gbd_poison gbd_poison;
typedef struct gbd_model gbd_model;
typedef struct gbd_boundary gbd_boundary;

GBD_API const char* gbd_version(void);
GBD_API const char* gbd_last_error(void);
GBD_API const char* gbd_status_name(gbd_status status);
GBD_API void gbd_string_free(char* s);
/* Seed of the named substream (stream, index) of a master seed; the same
 * derivation the experiment runner uses. */
GBD_API uint64_t gbd_derive_seed(uint64_t master, const char* stream, uint64_t index);

/* ---- datasets ---------------------------------------------------------- */

/* TU text format: <dir>/<name>_A.txt, _graph_indicator.txt,
 * _graph_labels.txt, _node_labels.txt. */
GBD_API gbd_status gbd_dataset_load_tu(const char* dir, const char* name, gbd_dataset** out);
GBD_API gbd_status gbd_dataset_save_tu(const gbd_dataset* dataset, const char* dir);
GBD_API gbd_status gbd_dataset_load_json(const char* path, gbd_dataset** out);
GBD_API gbd_status gbd_dataset_save_json(const gbd_dataset* dataset, const char* path);
/* Deterministic AIDS-shaped molecule fixture. */
GBD_API gbd_status gbd_dataset_synthesize_aids(uint64_t seed, size_t graph_count, gbd_dataset** out);
/* JSON object: name, graphs, num_classes, feature_dim, average_nodes,
 * average_edges, min_nodes, max_nodes, class_counts. */
GBD_API gbd_status gbd_dataset_info(const gbd_dataset* dataset, char** out_json);
GBD_API size_t gbd_dataset_size(const gbd_dataset* dataset);
GBD_API void gbd_dataset_free(gbd_dataset* dataset);

/* ---- splits ------------------------------------------------------------ */

GBD_API gbd_status gbd_split_create(const gbd_dataset* dataset, double train, double validation, double test,
                                    uint64_t seed, gbd_split** out);
GBD_API gbd_status gbd_split_load(const char* path, gbd_split** out);
GBD_API gbd_status gbd_split_save(const gbd_split* split, const char* path);
/* part: 0 = train, 1 = validation, 2 = test. */
GBD_API size_t gbd_split_count(const gbd_split* split, int part);
GBD_API void gbd_split_free(gbd_split* split);

/* ---- attack ------------------------------------------------------------ */

/* spec_json keys: size_fraction, density, target_label, poisoning_rate, seed.
 * Writes the poisoned copy of the dataset and the poison record. */
GBD_API gbd_status gbd_attack_poison(const gbd_dataset* dataset, const gbd_split* split, const char* spec_json,
                                     gbd_dataset** poisoned, gbd_poison** record);
/* Trigger-embedded copies of the non-target test graphs. */
GBD_API gbd_status gbd_attack_embed_test(const gbd_dataset* clean, const gbd_split* split,
                                         const gbd_poison* record, gbd_dataset** trojan);
GBD_API gbd_status gbd_poison_load(const char* path, gbd_poison** out);
GBD_API gbd_status gbd_poison_save(const gbd_poison* record, const char* path);
GBD_API size_t gbd_poison_victim_count(const gbd_poison* record);
GBD_API int gbd_poison_target_label(const gbd_poison* record);
GBD_API void gbd_poison_free(gbd_poison* record);

/* ---- model ------------------------------------------------------------- */

/* model_json keys: architecture (graph_conv|gin), layer_dims, readout
 * (mean|sum), gin_epsilon, mlp_hidden. Input and output sizes come from the
 * dataset. train_json keys: epochs, learning_rate, batch_size, seed.
 * Trains on the split's train part of `train_set`; the clean test part of
 * `clean_set` and the optional `trojan` set are monitored per epoch.
 * history_csv receives "epoch,loss,clean_acc,asr" (may be NULL). */
GBD_API gbd_status gbd_model_train(const gbd_dataset* train_set, const gbd_dataset* clean_set,
                                   const gbd_split* split, const gbd_dataset* trojan, int target_label,
                                   const char* model_json, const char* train_json, gbd_model** out,
                                   char** history_csv);
GBD_API gbd_status gbd_model_load(const char* path, gbd_model** out);
GBD_API gbd_status gbd_model_save(const gbd_model* model, const char* path);
GBD_API size_t gbd_model_parameter_count(const gbd_model* model);
/* probabilities must hold `capacity` doubles; capacity >= class count. */
GBD_API gbd_status gbd_model_predict(const gbd_model* model, const gbd_dataset* dataset, size_t graph_index,
                                     double* probabilities, size_t capacity, int* predicted_label);
GBD_API void gbd_model_free(gbd_model* model);

/* ---- defense ----------------------------------------------------------- */

/* explainer_json keys: method (integrated_gradients|occlusion), ig_steps,
 * sparsity_bounds [min, max], output (probability|logit). NULL = defaults. */
GBD_API gbd_status gbd_boundary_calibrate(const gbd_model* model, const gbd_dataset* clean_set,
                                          const gbd_split* split, const char* explainer_json, double quantile,
                                          gbd_boundary** out);
GBD_API gbd_status gbd_boundary_load(const char* path, gbd_boundary** out);
GBD_API gbd_status gbd_boundary_save(const gbd_boundary* boundary, const char* path);
GBD_API double gbd_boundary_threshold(const gbd_boundary* boundary);
GBD_API void gbd_boundary_free(gbd_boundary* boundary);

/* Defends every graph of `dataset` (all graphs when indices is NULL) and
 * returns one JSON log line per graph, newline-terminated. */
GBD_API gbd_status gbd_defend(const gbd_model* model, const gbd_boundary* boundary, const gbd_dataset* dataset,
                              const size_t* indices, size_t index_count, const char* explainer_json,
                              char** out_jsonl);

/* One results row (JSON object with the results-CSV columns) for a trained
 * model: clean accuracy on the split's test part, ASR before and after the
 * defense on `trojan`, defense accuracy, FAR, FRR and mean ES. */
GBD_API gbd_status gbd_evaluate(const gbd_model* model, const gbd_boundary* boundary, const gbd_dataset* clean_set,
                                const gbd_split* split, const gbd_dataset* trojan, const gbd_poison* record,
                                const char* explainer_json, char** out_json);
/* Header plus one row per element of a JSON array of evaluate() objects. */
GBD_API gbd_status gbd_results_csv(const char* rows_json, char** out_csv);

/* ---- experiments ------------------------------------------------------- */

/* Expanded grid as a JSON array, without running anything. */
GBD_API gbd_status gbd_sweep_plan(const char* config_json, char** out_json);
/* Runs the grid and writes the report files into out_dir. Rows that fail
 * are recorded in errors.jsonl and counted in failed_rows; the call itself
 * fails only when the config or dataset cannot be used. */
GBD_API gbd_status gbd_sweep_run(const char* config_json, int jobs, const char* out_dir, size_t* failed_rows);
/* Per-epoch ASR / clean-accuracy curves for every model of the config on the
 * first grid point; writes capacity.csv and curves into out_dir and returns
 * a JSON summary (parameter counts, first epoch with ASR > 0.5). */
GBD_API gbd_status gbd_capacity_study(const char* config_json, const char* out_dir, char** out_json);
/* Mean and range per configuration point of a results CSV. */
GBD_API gbd_status gbd_report_summarize(const char* results_csv_path, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* GBD_GBD_H */
