/* C interface to the fare simulator. All handles are opaque; every call
 * that can fail returns a fare_status and leaves a message retrievable with
 * fare_last_error() on the calling thread. */
#ifndef FARE_FARE_H
#define FARE_FARE_H

#include <stddef.h>
#include <stdint.h>

#if defined(FARE_BUILDING_LIBRARY)
#define FARE_API __attribute__((visibility("default")))
#else
#define FARE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fare_status {
  FARE_OK = 0,
  FARE_ERR_INVALID_ARGUMENT = 1,
  FARE_ERR_CONFIG = 2,
  FARE_ERR_DIMENSION = 3,
  FARE_ERR_INFEASIBLE = 4,
  FARE_ERR_IO = 5,
  FARE_ERR_PARTIAL = 6, /* some seeds of a run failed; reports still written */
  FARE_ERR_INTERNAL = 7
} fare_status;

typedef enum fare_strategy {
  FARE_STRATEGY_FAULT_FREE = 0,
  FARE_STRATEGY_FAULT_UNAWARE = 1,
  FARE_STRATEGY_NEURON_REORDER = 2,
  FARE_STRATEGY_CLIP_ONLY = 3,
  FARE_STRATEGY_FARE = 4
} fare_strategy;

typedef enum fare_solver { FARE_SOLVER_EXACT = 0, FARE_SOLVER_SUITOR = 1 } fare_solver;

typedef enum fare_format { FARE_FORMAT_CSV = 0, FARE_FORMAT_JSON = 1 } fare_format;

typedef struct fare_faultset fare_faultset;
typedef struct fare_adjacency fare_adjacency;
typedef struct fare_mapping fare_mapping;
typedef struct fare_experiment fare_experiment;

FARE_API const char* fare_version(void);
FARE_API const char* fare_status_string(fare_status status);
/* Message of the last failing call on this thread, "" if none. */
FARE_API const char* fare_last_error(void);
/* Same, as {"status": "...", "message": "..."}. */
FARE_API const char* fare_last_error_json(void);
/* Frees strings returned through char** out-parameters. */
FARE_API void fare_string_free(char* s);

FARE_API fare_status fare_strategy_parse(const char* name, fare_strategy* out);
FARE_API const char* fare_strategy_name(fare_strategy strategy);
FARE_API fare_status fare_solver_parse(const char* name, fare_solver* out);

/* ---- fault maps ---- */

/* Injects faults into `crossbars` n x n arrays. Ratio is sa0:sa1. */
FARE_API fare_status fare_faultset_inject(double density, double sa0, double sa1, size_t crossbars,
                                          size_t n, uint64_t seed, fare_faultset** out);
FARE_API fare_status fare_faultset_read_csv(const char* path, fare_faultset** out);
FARE_API fare_status fare_faultset_write_csv(const fare_faultset* set, const char* path);
FARE_API fare_status fare_faultset_to_csv(const fare_faultset* set, char** out);
FARE_API size_t fare_faultset_crossbars(const fare_faultset* set);
FARE_API size_t fare_faultset_n(const fare_faultset* set);
FARE_API size_t fare_faultset_sa0(const fare_faultset* set);
FARE_API size_t fare_faultset_sa1(const fare_faultset* set);
FARE_API void fare_faultset_free(fare_faultset* set);

/* ---- adjacency (A + I of an undirected graph) ---- */

/* `edges` holds 2 * count node ids. */
FARE_API fare_status fare_adjacency_from_edges(size_t nodes, const uint32_t* edges, size_t count,
                                               fare_adjacency** out);
FARE_API fare_status fare_adjacency_read(const char* path, fare_adjacency** out);
FARE_API size_t fare_adjacency_nodes(const fare_adjacency* adj);
FARE_API void fare_adjacency_free(fare_adjacency* adj);

/* ---- block mapping ---- */

/* Decomposes the adjacency into n x n blocks (n from the fault set) and maps
 * them onto the crossbars: fault-aware when `fault_aware` is nonzero,
 * otherwise block i on crossbar i with identity rows. */
FARE_API fare_status fare_map(const fare_adjacency* adj, const fare_faultset* faults,
                              fare_solver solver, int fault_aware, fare_mapping** out);
FARE_API int64_t fare_mapping_total_cost(const fare_mapping* m);
FARE_API int64_t fare_mapping_sa1_nonoverlap(const fare_mapping* m);
FARE_API size_t fare_mapping_blocks(const fare_mapping* m);
FARE_API size_t fare_mapping_removed_blocks(const fare_mapping* m);
FARE_API fare_status fare_mapping_to_json(const fare_mapping* m, char** out);
FARE_API void fare_mapping_free(fare_mapping* m);

/* ---- experiments ---- */

FARE_API fare_status fare_experiment_load(const char* config_path, fare_experiment** out);
FARE_API fare_status fare_experiment_parse(const char* config_json, fare_experiment** out);
FARE_API fare_status fare_experiment_set_output_dir(fare_experiment* exp, const char* dir);
/* Returns FARE_ERR_PARTIAL when some seeds failed. */
FARE_API fare_status fare_experiment_run(fare_experiment* exp);
/* Resolved output directory; valid until the handle is freed. */
FARE_API const char* fare_experiment_output_dir(const fare_experiment* exp);
/* Top-level report of the last run ("" before running). */
FARE_API const char* fare_experiment_report(const fare_experiment* exp);
FARE_API void fare_experiment_free(fare_experiment* exp);

/* ---- timing model ---- */

typedef struct fare_pipeline {
  int batches;
  int stages;
  double stage_delay;
  int epochs;
  double preprocess_time;
  double bist_overhead_fraction;
  double nr_stall;
} fare_pipeline;

FARE_API fare_pipeline fare_pipeline_default(void);
FARE_API fare_status fare_perf_evaluate(const fare_pipeline* spec, fare_strategy strategy,
                                        double* epoch_time, double* total_time);
/* Table over all strategies. */
FARE_API fare_status fare_perf_report(const fare_pipeline* spec, fare_format format, char** out);

/* ---- reports ---- */

/* CSV comparing final accuracies across run directories. */
FARE_API fare_status fare_report_merge(const char* const* run_dirs, size_t count, char** out);

#ifdef __cplusplus
}
#endif

#endif
