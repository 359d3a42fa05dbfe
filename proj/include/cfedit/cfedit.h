#ifndef CFEDIT_CFEDIT_H
#define CFEDIT_CFEDIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CFE_API __declspec(dllexport)
#else
#define CFE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cfe_engine cfe_engine;

typedef enum cfe_status {
    CFE_OK = 0,
    CFE_ERR_INVALID_ARGUMENT = 1,
    CFE_ERR_IO = 2,
    CFE_ERR_FORMAT = 3,
    CFE_ERR_NOT_FOUND = 4,
    CFE_ERR_PRECONDITION = 5,
    CFE_ERR_BACKEND_UNAVAILABLE = 6,
    CFE_ERR_PROTOCOL = 7,
    CFE_ERR_INTERNAL = 8
} cfe_status;

CFE_API const char* cfe_version(void);

/* Message for the last failing call on this thread; "" after a success. */
CFE_API const char* cfe_last_error(void);

/* Releases strings returned through char** out-parameters. NULL is a no-op. */
CFE_API void cfe_string_free(char* s);

/* Validates a JSON config (NULL or "" means all defaults) and returns it with
   defaults filled in. */
CFE_API cfe_status cfe_config_normalize(const char* config_json, char** out_json);

/* Builds the index, embeddings and language-model artifacts. */
CFE_API cfe_status cfe_index(const char* config_json, char** out_summary_json);

CFE_API cfe_status cfe_engine_open(const char* config_json, cfe_engine** out);
CFE_API void cfe_engine_close(cfe_engine* engine);

/* Top-k ranking as JSON {query, results: [{rank, doc_id, score}]}. */
CFE_API cfe_status cfe_search(const cfe_engine* engine, const char* query, size_t k, char** out_json);

/* One counterfactual edit, with the per-iteration trace. */
CFE_API cfe_status cfe_edit(const cfe_engine* engine, const char* query, const char* doc_id,
                            const char* counter_doc_id, char** out_json);

/* JSONL triplets in, JSONL edit results out. */
CFE_API cfe_status cfe_edit_batch(const cfe_engine* engine, const char* triplets_path, const char* out_path,
                                  size_t* out_count);

/* Comma-separated methods from cfe2, mask_only, max_flip. Writes
   <out_prefix>.json, .md and .timing.json; the summary JSON carries a
   markdown table with runtimes and any dataset warnings. */
CFE_API cfe_status cfe_eval(const cfe_engine* engine, const char* dataset_path, const char* methods,
                            const char* out_prefix, char** out_summary_json);

/* CFE2 at each beam width, written like cfe_eval. */
CFE_API cfe_status cfe_sweep_beam(const cfe_engine* engine, const char* dataset_path, const size_t* sizes,
                                  size_t n_sizes, const char* out_prefix, char** out_summary_json);

/* Synthetic topical corpus and query set as JSONL. */
CFE_API cfe_status cfe_synth(uint64_t seed, size_t documents, size_t queries, const char* corpus_path,
                             const char* queries_path);

#ifdef __cplusplus
}
#endif

#endif
