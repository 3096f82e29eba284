/* C interface to the kerm library. Every function returns a kerm_status; on
 * failure kerm_last_error() describes the problem for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * kerm_string_free. */
#ifndef KERM_H
#define KERM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(KERM_BUILDING_LIBRARY)
#    define KERM_API __declspec(dllexport)
#  else
#    define KERM_API __declspec(dllimport)
#  endif
#else
#  define KERM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kerm_status {
  KERM_OK = 0,
  KERM_ERR_INVALID_ARGUMENT = 1,
  KERM_ERR_IO = 2,
  KERM_ERR_PARSE = 3,
  KERM_ERR_DIMENSION = 4,
  KERM_ERR_NUMERIC = 5,
  KERM_ERR_REMOTE = 6,
  KERM_ERR_RUNTIME = 7
} kerm_status;

#define KERM_CATEGORY_COUNT 14

/* Mention values written by kerm_label_report. */
enum { KERM_UNMENTIONED = 0, KERM_NEGATIVE = 1, KERM_UNCERTAIN = 2, KERM_POSITIVE = 3 };

typedef struct kerm_corpus kerm_corpus;
typedef struct kerm_embedder kerm_embedder;
typedef struct kerm_index kerm_index;
typedef struct kerm_lexicon kerm_lexicon;
typedef struct kerm_judge kerm_judge;
typedef struct kerm_experiment kerm_experiment;

KERM_API const char* kerm_version(void);
KERM_API const char* kerm_last_error(void);
KERM_API const char* kerm_status_name(kerm_status status);
KERM_API void kerm_string_free(char* s);
/* Per-stage seed derived from a top-level seed and a stage name. */
KERM_API uint64_t kerm_derive_seed(uint64_t seed, const char* stage);

/* Corpus */
KERM_API kerm_status kerm_corpus_build(const char* const* documents, size_t count, kerm_corpus** out);
KERM_API kerm_status kerm_corpus_load(const char* path, kerm_corpus** out);
KERM_API kerm_status kerm_corpus_save(const kerm_corpus* corpus, const char* path);
KERM_API size_t kerm_corpus_size(const kerm_corpus* corpus);
KERM_API kerm_status kerm_corpus_fact_text(const kerm_corpus* corpus, size_t id, char** out);
KERM_API kerm_status kerm_corpus_fingerprint(const kerm_corpus* corpus, char** out);
KERM_API void kerm_corpus_free(kerm_corpus* corpus);

/* Embedders. sigma and seed control image synthesis from paired reports. */
typedef int (*kerm_embed_fn)(void* user, const char* text, double* out, size_t dimension);

KERM_API kerm_status kerm_embedder_hashing(size_t dimension, double sigma, uint64_t seed, kerm_embedder** out);
/* fn fills dimension values and returns 0, or returns non-zero on failure. */
KERM_API kerm_status kerm_embedder_callback(size_t dimension, kerm_embed_fn fn, void* user, const char* name,
                                            double sigma, uint64_t seed, kerm_embedder** out);
KERM_API kerm_status kerm_embedder_replay(const char* path, double sigma, uint64_t seed, kerm_embedder** out);
/* JSON Lines fixture of source's vectors for the given texts. */
KERM_API kerm_status kerm_embedder_record(const kerm_embedder* source, const char* const* texts, size_t count,
                                          char** out);
KERM_API size_t kerm_embedder_dimension(const kerm_embedder* embedder);
KERM_API kerm_status kerm_embed_text(const kerm_embedder* embedder, const char* text, double* out, size_t capacity);
/* features may be NULL (then report is required); report may be NULL. */
KERM_API kerm_status kerm_embed_image(const kerm_embedder* embedder, const char* id, const double* features,
                                      size_t feature_count, const char* report, double* out, size_t capacity);
KERM_API void kerm_embedder_free(kerm_embedder* embedder);

/* Retrieval */
typedef struct kerm_scored_fact {
  size_t fact_id;
  double score;
  double retrieval_score; /* valid when has_retrieval_score != 0 */
  int has_retrieval_score;
} kerm_scored_fact;

KERM_API kerm_status kerm_index_build(const kerm_corpus* corpus, const kerm_embedder* embedder, kerm_index** out);
KERM_API kerm_status kerm_index_load(const char* path, kerm_index** out);
KERM_API kerm_status kerm_index_save(const kerm_index* index, const char* path);
KERM_API size_t kerm_index_size(const kerm_index* index);
KERM_API size_t kerm_index_dimension(const kerm_index* index);
KERM_API kerm_status kerm_index_fingerprint(const kerm_index* index, char** out);
KERM_API kerm_status kerm_index_embedder_name(const kerm_index* index, char** out);
KERM_API void kerm_index_free(kerm_index* index);

/* Writes min(k, size) results; *count receives the number written. */
KERM_API kerm_status kerm_retrieve(const kerm_index* index, const double* query, size_t dimension, size_t k,
                                   kerm_scored_fact* out, size_t capacity, size_t* count);
/* indication and history may be NULL. *context_free is set when both are empty. */
KERM_API kerm_status kerm_purify(const kerm_scored_fact* candidates, size_t candidate_count, const char* indication,
                                 const char* history, const kerm_corpus* corpus, const kerm_embedder* embedder,
                                 size_t m, kerm_scored_fact* out, size_t capacity, size_t* count,
                                 int* context_free);
/* corpus may be NULL; when given, fact texts are included. */
KERM_API kerm_status kerm_scored_facts_jsonl(const kerm_scored_fact* facts, size_t count, const kerm_corpus* corpus,
                                             char** out);
KERM_API kerm_status kerm_scored_facts_parse(const char* jsonl, kerm_scored_fact* out, size_t capacity,
                                             size_t* count);

/* Labeler */
KERM_API kerm_status kerm_lexicon_default(kerm_lexicon** out);
KERM_API kerm_status kerm_lexicon_load(const char* path, kerm_lexicon** out);
KERM_API kerm_status kerm_lexicon_serialize(const kerm_lexicon* lexicon, char** out);
KERM_API void kerm_lexicon_free(kerm_lexicon* lexicon);
KERM_API const char* kerm_category_name(size_t index);
KERM_API kerm_status kerm_label_report(const kerm_lexicon* lexicon, const char* report,
                                       int slots[KERM_CATEGORY_COUNT]);
KERM_API kerm_status kerm_label_report_json(const kerm_lexicon* lexicon, const char* report, char** out);

/* Rewards */
typedef struct kerm_judge_config {
  int remote;              /* 0 offline, 1 remote */
  const char* endpoint;    /* required when remote */
  double timeout_seconds;  /* <= 0 selects the default of 10 */
  int retries;             /* < 0 selects the default of 2 */
  const char* prompt_template; /* NULL selects the built-in template */
} kerm_judge_config;

KERM_API kerm_status kerm_judge_create(const kerm_judge_config* config, kerm_judge** out);
KERM_API void kerm_judge_free(kerm_judge* judge);

typedef struct kerm_reward_options {
  double alpha;
  int use_r_dis;
  int use_r_sen;
  int report_mean;        /* 1: every sentence scored with the report mean */
  int uncertain_negative; /* 1: uncertain mentions count as negative */
  int macro;              /* 1: macro-averaged F1 */
} kerm_reward_options;

KERM_API kerm_reward_options kerm_reward_options_default(void);
KERM_API kerm_status kerm_disease_reward(const kerm_lexicon* lexicon, const char* generated, const char* reference,
                                         const kerm_reward_options* options, double* out);
/* Reward trace of generated against reference as a JSON object. */
KERM_API kerm_status kerm_reward_trace(const kerm_lexicon* lexicon, const kerm_judge* judge, const char* generated,
                                       const char* reference, const kerm_reward_options* options, char** out);

/* Metrics. Returns the evaluation report as JSON. */
KERM_API kerm_status kerm_evaluate(const char* const* candidates, const char* const* references, size_t count,
                                   const kerm_lexicon* lexicon, int uncertain_negative, int per_example,
                                   char** out);

/* Synthetic data written as JSON Lines. */
KERM_API kerm_status kerm_synth_dataset(size_t n, uint64_t seed, const kerm_lexicon* lexicon,
                                        const kerm_embedder* embedder, const char* path);

/* Experiments. text is a JSON object or key=value lines; NULL gives defaults.
 * Relative paths in the text resolve against base_dir (may be NULL). */
KERM_API kerm_status kerm_experiment_create(const char* text, const char* base_dir, kerm_experiment** out);
KERM_API kerm_status kerm_experiment_load(const char* path, kerm_experiment** out);
/* value uses the same syntax as a key=value line. */
KERM_API kerm_status kerm_experiment_set(kerm_experiment* experiment, const char* key, const char* value);
KERM_API kerm_status kerm_experiment_json(const kerm_experiment* experiment, char** out);
KERM_API void kerm_experiment_free(kerm_experiment* experiment);

/* Trains on the training split. checkpoint_path and log_path may be NULL.
 * summary receives a JSON object with held-out results (may be NULL). */
KERM_API kerm_status kerm_train(const kerm_experiment* experiment, const char* checkpoint_path,
                                const char* log_path, char** summary);
/* Greedy reports for the held-out split, or for dataset_path when given, as
 * JSON Lines {"id","report","reference"}. */
KERM_API kerm_status kerm_generate(const kerm_experiment* experiment, const char* checkpoint_path,
                                   const char* dataset_path, char** out);
/* JSON result; table receives the human-readable form (may be NULL). A
 * failing row returns an error status after filling both outputs with the
 * completed rows. */
KERM_API kerm_status kerm_ablate(const kerm_experiment* experiment, char** json, char** table);
/* values NULL selects {0, 0.2, 0.4, 0.6, 0.8, 1}. */
KERM_API kerm_status kerm_sweep_alpha(const kerm_experiment* experiment, const double* values, size_t count,
                                      char** json, char** csv);

#ifdef __cplusplus
}
#endif

#endif
