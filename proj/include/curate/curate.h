#ifndef CURATE_CURATE_H
#define CURATE_CURATE_H

#include <stddef.h>
#include <stdint.h>

#if defined(CURATE_BUILDING_LIBRARY)
#define CURATE_API __attribute__((visibility("default")))
#else
#define CURATE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The nonzero values match the CLI exit codes. */
typedef enum curate_status {
    CURATE_OK = 0,
    CURATE_ERR_USAGE = 1,
    CURATE_ERR_DATA = 2,
    CURATE_ERR_IO = 3,
    CURATE_ERR_INTERNAL = 4
} curate_status;

CURATE_API const char* curate_version(void);

/* Message of the last failed call on this thread; "" when none. */
CURATE_API const char* curate_last_error(void);

/* Releases strings returned through char** out-parameters. */
CURATE_API void curate_string_free(char* s);

/* Quality filter configuration. */
typedef struct curate_filter_config curate_filter_config;

CURATE_API curate_status curate_filter_config_new(curate_filter_config** out);
CURATE_API curate_status curate_filter_config_load(const char* path, curate_filter_config** out);
CURATE_API curate_status curate_filter_config_set(curate_filter_config* cfg, const char* key, const char* value);
CURATE_API curate_status curate_filter_config_merge_json(curate_filter_config* cfg, const char* json);
CURATE_API curate_status curate_filter_config_to_json(const curate_filter_config* cfg, char** out_json);
CURATE_API void curate_filter_config_free(curate_filter_config* cfg);

/*
 * Scrubs lines, then runs the document checks. *reason is a static string
 * naming the first failed check, or NULL when kept. If scrubbed_text is not
 * NULL it receives the text after line scrubbing.
 */
CURATE_API curate_status curate_filter_document(const curate_filter_config* cfg, const char* text, size_t len,
                                                int* kept, const char** reason, char** scrubbed_text);

/* MinHash signer. params_json may be NULL for defaults; keys: shingle, bands,
   rows, seed, shingle_unit ("chars" or "words"). */
typedef struct curate_minhasher curate_minhasher;

CURATE_API curate_status curate_minhasher_new(const char* params_json, curate_minhasher** out);
CURATE_API size_t curate_minhasher_width(const curate_minhasher* h);
CURATE_API curate_status curate_minhasher_sign(const curate_minhasher* h, const char* text, size_t len,
                                               uint64_t* out, size_t out_len);
CURATE_API void curate_minhasher_free(curate_minhasher* h);

/* Span count stores written by the sentence dedup stage. */
typedef struct curate_span_store curate_span_store;

CURATE_API curate_status curate_span_store_open(const char* path, curate_span_store** out);
CURATE_API uint64_t curate_span_store_count(const curate_span_store* store, const uint8_t hash[16]);
CURATE_API size_t curate_span_store_size(const curate_span_store* store);
CURATE_API curate_status curate_span_store_merge(const char* const* inputs, size_t count, const char* output);
CURATE_API void curate_span_store_close(curate_span_store* store);

/* Whole pipeline. */
typedef struct curate_pipeline curate_pipeline;

CURATE_API curate_status curate_pipeline_load(const char* config_path, curate_pipeline** out);
CURATE_API curate_status curate_pipeline_from_json(const char* json, const char* base_dir, curate_pipeline** out);
CURATE_API curate_status curate_pipeline_set_seed(curate_pipeline* p, uint64_t seed);
CURATE_API curate_status curate_pipeline_set_threads(curate_pipeline* p, unsigned threads);
/* stages: comma-separated subset of filter,minhash,sentdedup,analyze; NULL or
   "" runs all. report_json may be NULL. */
CURATE_API curate_status curate_pipeline_run(curate_pipeline* p, const char* stages, char** report_json);
CURATE_API void curate_pipeline_free(curate_pipeline* p);

/* Single stages driven by a JSON options object; the stage statistics come
   back as JSON. */
CURATE_API curate_status curate_run_filter(const char* options_json, char** result_json);
CURATE_API curate_status curate_run_minhash(const char* options_json, char** result_json);
CURATE_API curate_status curate_run_sentdedup(const char* options_json, char** result_json);
CURATE_API curate_status curate_run_analyze(const char* options_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif
