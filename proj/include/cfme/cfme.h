#ifndef CFME_CFME_H
#define CFME_CFME_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CFME_API __declspec(dllexport)
#else
#define CFME_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure a description is kept in
 * a per-thread buffer readable through cfme_last_error(). */
typedef enum cfme_status {
  CFME_OK = 0,
  CFME_ERR_INVALID_ARGUMENT = 1,
  CFME_ERR_IO = 2,
  CFME_ERR_FORMAT = 3,
  CFME_ERR_NUMERIC = 4,
  CFME_ERR_INVARIANT = 5,
  CFME_ERR_INTERNAL = 6
} cfme_status;

CFME_API const char* cfme_last_error(void);
CFME_API const char* cfme_status_name(cfme_status status);
CFME_API const char* cfme_version(void);

/* ---- vocabulary ------------------------------------------------------- */

/* Ids 0, 1, 2 are the sentence start, sentence end and unknown tokens. */
typedef struct cfme_vocab cfme_vocab;

/* Keeps the max_size most frequent tokens on top of the reserved ones. */
CFME_API cfme_status cfme_vocab_build(const char* corpus_path, size_t max_size, int lowercase,
                                      cfme_vocab** out);
CFME_API cfme_status cfme_vocab_load(const char* path, cfme_vocab** out);
CFME_API cfme_status cfme_vocab_save(const cfme_vocab* vocab, const char* path);
CFME_API size_t cfme_vocab_size(const cfme_vocab* vocab);
/* NULL when the id is out of range. */
CFME_API const char* cfme_vocab_word(const cfme_vocab* vocab, int32_t id);
/* Unknown id for out-of-vocabulary words. */
CFME_API int32_t cfme_vocab_id(const cfme_vocab* vocab, const char* word);
CFME_API void cfme_vocab_free(cfme_vocab* vocab);

/* ---- corpus ----------------------------------------------------------- */

/* Tokenized text plus its merged trigram events. */
typedef struct cfme_corpus cfme_corpus;

CFME_API cfme_status cfme_corpus_load(const cfme_vocab* vocab, const char* path, int lowercase,
                                      cfme_corpus** out);
CFME_API size_t cfme_corpus_sentence_count(const cfme_corpus* corpus);
CFME_API size_t cfme_corpus_token_count(const cfme_corpus* corpus);
CFME_API size_t cfme_corpus_event_count(const cfme_corpus* corpus);
CFME_API void cfme_corpus_free(cfme_corpus* corpus);

/* ---- word classes ----------------------------------------------------- */

/* A 1 to 3 level nested class map over the whole vocabulary. */
typedef struct cfme_classes cfme_classes;

/* level_sizes are class counts from coarsest to finest. */
CFME_API cfme_status cfme_classes_induce(const cfme_corpus* corpus, const cfme_vocab* vocab,
                                         const int* level_sizes, size_t level_count,
                                         uint64_t seed, cfme_classes** out);
CFME_API cfme_status cfme_classes_load(const char* path, const cfme_vocab* vocab,
                                       cfme_classes** out);
CFME_API cfme_status cfme_classes_save(const cfme_classes* classes, const cfme_vocab* vocab,
                                       const char* path);
CFME_API size_t cfme_classes_levels(const cfme_classes* classes);
CFME_API size_t cfme_classes_count(const cfme_classes* classes, size_t level);
/* -1 when word or level is out of range. */
CFME_API int32_t cfme_classes_class_of(const cfme_classes* classes, int32_t word, size_t level);
CFME_API void cfme_classes_free(cfme_classes* classes);

/* Default class counts for 1 or 2 class levels given the vocabulary. */
CFME_API cfme_status cfme_default_level_sizes(const cfme_vocab* vocab, int class_levels,
                                              int* sizes_out);

/* ---- features --------------------------------------------------------- */

/* Instantiates the word-level features and writes
 * `id<TAB>kind<TAB>args...<TAB>count` per feature. indicator must have one
 * level. */
CFME_API cfme_status cfme_features_dump(const cfme_corpus* corpus,
                                        const cfme_classes* indicator, int64_t min_count,
                                        const char* out_path, size_t* feature_count);

/* ---- training --------------------------------------------------------- */

typedef struct cfme_train_config {
  const char* method;      /* gis, gis-cache, factored2, factored3 */
  int level_sizes[2];      /* 0 = default for the vocabulary */
  int indicator_classes;   /* used when no indicator map is supplied */
  int64_t min_count;
  int iterations;
  double tolerance;
  uint64_t seed;
  int threads;
} cfme_train_config;

CFME_API void cfme_train_config_init(cfme_train_config* config);

typedef struct cfme_model cfme_model;

/* hierarchy and indicator may be NULL, in which case they are induced from
 * the corpus. A supplied hierarchy must have as many levels as the method
 * has class levels. */
CFME_API cfme_status cfme_model_train(const cfme_corpus* corpus, const cfme_vocab* vocab,
                                      const cfme_classes* hierarchy,
                                      const cfme_classes* indicator,
                                      const cfme_train_config* config, cfme_model** out);
CFME_API cfme_status cfme_model_save(const cfme_model* model, const char* dir);
CFME_API cfme_status cfme_model_load(const char* dir, cfme_model** out);
CFME_API const char* cfme_model_method(const cfme_model* model);
CFME_API size_t cfme_model_level_count(const cfme_model* model);
/* Borrowed; valid while the model lives. */
CFME_API const cfme_vocab* cfme_model_vocab(const cfme_model* model);
/* P(word | w2 w1); boundary tokens get 0. */
CFME_API cfme_status cfme_model_probability(const cfme_model* model, int32_t w2, int32_t w1,
                                            int32_t word, double* out);

typedef struct cfme_train_summary {
  int iterations;          /* most iterations run by any level */
  int converged;           /* every level met the tolerance */
  double final_loglike;    /* summed over levels */
  double max_deviation;    /* worst level, last iteration */
  double ops_per_event;    /* first iteration, summed over levels */
  double sec_per_iter;
} cfme_train_summary;

/* Only for models trained in this process. */
CFME_API cfme_status cfme_model_train_summary(const cfme_model* model,
                                              cfme_train_summary* out);
/* `level<TAB>iteration<TAB>loglike<TAB>op_count<TAB>max_deviation<TAB>seconds`. */
CFME_API cfme_status cfme_model_write_train_log(const cfme_model* model, const char* path);
CFME_API void cfme_model_free(cfme_model* model);

/* ---- evaluation ------------------------------------------------------- */

typedef struct cfme_eval_config {
  const char* test_path;
  int lowercase;
  int interpolate;               /* mix with a trigram model */
  const char* trigram_path;      /* trigram training text, needed to interpolate */
  const char* alpha_data_path;   /* text for fitting alpha; NULL uses the test text */
  const char* alpha_method;      /* em, grid or fixed */
  double alpha;                  /* weight of the maxent model when fixed */
  const char* token_log_path;    /* optional `position<TAB>word<TAB>logprob` */
} cfme_eval_config;

CFME_API void cfme_eval_config_init(cfme_eval_config* config);

typedef struct cfme_eval_result {
  double perplexity;        /* of the evaluated (possibly interpolated) model */
  double log_sum;           /* natural-log probability summed over positions */
  int64_t positions;
  double maxent_perplexity;
  double trigram_perplexity; /* 0 unless interpolating */
  double alpha;              /* 1 unless interpolating */
  const char* alpha_method;  /* static string */
} cfme_eval_result;

CFME_API cfme_status cfme_eval(const cfme_model* model, const cfme_eval_config* config,
                               cfme_eval_result* out);

/* ---- benchmark -------------------------------------------------------- */

typedef struct cfme_bench_config {
  const char* corpus_path;
  const char* methods;       /* comma separated */
  const size_t* sizes;       /* training tokens, ascending */
  size_t size_count;
  size_t max_vocab;
  int64_t min_count;
  int indicator_classes;
  int iterations;
  uint64_t seed;
  int threads;
  int lowercase;
  const char* log_path;      /* optional progress log */
} cfme_bench_config;

CFME_API void cfme_bench_config_init(cfme_bench_config* config);

typedef struct cfme_bench_row {
  const char* method;        /* static string */
  size_t train_size;
  double sec_per_iter;
  double ops_per_event;
  double relative_speed;
  double sec_min;
  double sec_max;
  size_t vocab_size;
} cfme_bench_row;

typedef struct cfme_bench_report cfme_bench_report;

CFME_API cfme_status cfme_bench_run(const cfme_bench_config* config, cfme_bench_report** out);
CFME_API size_t cfme_bench_row_count(const cfme_bench_report* report);
CFME_API cfme_status cfme_bench_row_get(const cfme_bench_report* report, size_t index,
                                        cfme_bench_row* out);
/* path "-" writes to standard output. */
CFME_API cfme_status cfme_bench_write_tsv(const cfme_bench_report* report, const char* path);
CFME_API void cfme_bench_report_free(cfme_bench_report* report);

/* ---- class-count sweep ------------------------------------------------ */

/* One GIS iteration of the two-level problem per candidate; *best is the
 * count with the fewest candidate evaluations per event (ties: smaller).
 * ops_per_event receives one value per candidate when not NULL. */
CFME_API cfme_status cfme_sweep_class_count(const cfme_corpus* corpus, const cfme_vocab* vocab,
                                            const cfme_classes* indicator,
                                            const int* candidates, size_t candidate_count,
                                            int64_t min_count, uint64_t seed, int* best,
                                            double* ops_per_event);

/* ---- synthetic corpora ------------------------------------------------ */

typedef struct cfme_synth_config {
  size_t tokens;
  int vocab_size;
  int classes;
  int successors;
  double zipf;
  int min_length;
  int max_length;
  uint64_t seed;
} cfme_synth_config;

CFME_API void cfme_synth_config_init(cfme_synth_config* config);
CFME_API cfme_status cfme_synth_corpus(const cfme_synth_config* config, const char* path,
                                       size_t* tokens_written);

#ifdef __cplusplus
}
#endif

#endif
