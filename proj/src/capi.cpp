#include "cfme/cfme.h"

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "bench.hpp"
#include "classing.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "factored.hpp"
#include "features.hpp"
#include "sweep.hpp"
#include "synth.hpp"

struct cfme_vocab {
  cfme::Vocabulary vocab;
};

struct cfme_corpus {
  cfme::TokenStream stream;
  std::vector<cfme::Event> events;
  std::size_t vocab_size = 0;
};

struct cfme_classes {
  cfme::ClassHierarchy classes;
};

struct cfme_model {
  cfme::ModelBundle bundle;
  cfme_vocab vocab;  // copy exposed through cfme_model_vocab
  std::optional<cfme::FactoredTrainLog> log;
};

struct cfme_bench_report {
  cfme::BenchReport report;
};

namespace {

thread_local std::string g_last_error;

cfme_status set_error(cfme_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

cfme_status from_code(cfme::ErrorCode code) {
  switch (code) {
    case cfme::ErrorCode::kInvalidArgument:
      return CFME_ERR_INVALID_ARGUMENT;
    case cfme::ErrorCode::kIo:
      return CFME_ERR_IO;
    case cfme::ErrorCode::kFormat:
      return CFME_ERR_FORMAT;
    case cfme::ErrorCode::kNumeric:
      return CFME_ERR_NUMERIC;
    case cfme::ErrorCode::kInvariant:
      return CFME_ERR_INVARIANT;
  }
  return CFME_ERR_INTERNAL;
}

template <typename Fn>
cfme_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CFME_OK;
  } catch (const cfme::Error& e) {
    return set_error(from_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CFME_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CFME_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CFME_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) cfme::fail(cfme::ErrorCode::kInvalidArgument, what);
}

cfme::CorpusOptions corpus_options(int lowercase) {
  cfme::CorpusOptions o;
  o.lowercase = lowercase != 0;
  return o;
}

cfme::TokenStream read_stream(const char* path, const cfme::Vocabulary& vocab, int lowercase) {
  require(path != nullptr, "missing corpus path");
  return cfme::tokenize(std::filesystem::path(path), vocab, corpus_options(lowercase));
}

std::span<const std::int32_t> indicator_map(const cfme::ClassHierarchy& indicator,
                                            std::size_t vocab_size) {
  require(indicator.levels() == 1, "indicator map must have exactly one level");
  require(indicator.vocab_size() == vocab_size, "indicator map does not match the vocabulary");
  return indicator.level_map(0);
}

cfme::GisOptions gis_options(const cfme_train_config& c) {
  cfme::GisOptions o;
  o.iterations = c.iterations;
  o.tolerance = c.tolerance;
  o.threads = c.threads;
  return o;
}

}  // namespace

extern "C" {

const char* cfme_last_error(void) { return g_last_error.c_str(); }

const char* cfme_status_name(cfme_status status) {
  switch (status) {
    case CFME_OK:
      return "ok";
    case CFME_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case CFME_ERR_IO:
      return "i/o error";
    case CFME_ERR_FORMAT:
      return "format error";
    case CFME_ERR_NUMERIC:
      return "numeric error";
    case CFME_ERR_INVARIANT:
      return "invariant violation";
    case CFME_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* cfme_version(void) { return "1.0.0"; }

cfme_status cfme_vocab_build(const char* corpus_path, size_t max_size, int lowercase,
                             cfme_vocab** out) {
  return guarded([&] {
    require(corpus_path && out, "null argument");
    auto v = cfme::build_vocabulary(std::filesystem::path(corpus_path), max_size,
                                    corpus_options(lowercase));
    *out = new cfme_vocab{std::move(v)};
  });
}

cfme_status cfme_vocab_load(const char* path, cfme_vocab** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new cfme_vocab{cfme::Vocabulary::load(std::filesystem::path(path))};
  });
}

cfme_status cfme_vocab_save(const cfme_vocab* vocab, const char* path) {
  return guarded([&] {
    require(vocab && path, "null argument");
    vocab->vocab.save(std::filesystem::path(path));
  });
}

size_t cfme_vocab_size(const cfme_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }

const char* cfme_vocab_word(const cfme_vocab* vocab, int32_t id) {
  if (!vocab || id < 0 || static_cast<std::size_t>(id) >= vocab->vocab.size()) return nullptr;
  return vocab->vocab.words()[static_cast<std::size_t>(id)].c_str();
}

int32_t cfme_vocab_id(const cfme_vocab* vocab, const char* word) {
  if (!vocab || !word) return cfme::Vocabulary::kUnknown;
  return vocab->vocab.id(word);
}

void cfme_vocab_free(cfme_vocab* vocab) { delete vocab; }

cfme_status cfme_corpus_load(const cfme_vocab* vocab, const char* path, int lowercase,
                             cfme_corpus** out) {
  return guarded([&] {
    require(vocab && path && out, "null argument");
    auto c = std::make_unique<cfme_corpus>();
    c->stream = read_stream(path, vocab->vocab, lowercase);
    c->events = cfme::extract_events(c->stream);
    c->vocab_size = vocab->vocab.size();
    *out = c.release();
  });
}

size_t cfme_corpus_sentence_count(const cfme_corpus* corpus) {
  return corpus ? corpus->stream.sentences.size() : 0;
}

size_t cfme_corpus_token_count(const cfme_corpus* corpus) {
  return corpus ? corpus->stream.token_count() : 0;
}

size_t cfme_corpus_event_count(const cfme_corpus* corpus) {
  return corpus ? corpus->events.size() : 0;
}

void cfme_corpus_free(cfme_corpus* corpus) { delete corpus; }

cfme_status cfme_classes_induce(const cfme_corpus* corpus, const cfme_vocab* vocab,
                                const int* level_sizes, size_t level_count, uint64_t seed,
                                cfme_classes** out) {
  return guarded([&] {
    require(corpus && vocab && level_sizes && out, "null argument");
    require(corpus->vocab_size == vocab->vocab.size(), "corpus was loaded with another vocabulary");
    cfme::InductionOptions o;
    o.seed = seed;
    auto h = cfme::build_hierarchy(corpus->events, vocab->vocab,
                                   std::span<const int>(level_sizes, level_count), o);
    *out = new cfme_classes{std::move(h)};
  });
}

cfme_status cfme_classes_load(const char* path, const cfme_vocab* vocab, cfme_classes** out) {
  return guarded([&] {
    require(path && vocab && out, "null argument");
    *out = new cfme_classes{cfme::ClassHierarchy::load(std::filesystem::path(path), vocab->vocab)};
  });
}

cfme_status cfme_classes_save(const cfme_classes* classes, const cfme_vocab* vocab,
                              const char* path) {
  return guarded([&] {
    require(classes && vocab && path, "null argument");
    classes->classes.save(std::filesystem::path(path), vocab->vocab);
  });
}

size_t cfme_classes_levels(const cfme_classes* classes) {
  return classes ? classes->classes.levels() : 0;
}

size_t cfme_classes_count(const cfme_classes* classes, size_t level) {
  if (!classes || level >= classes->classes.levels()) return 0;
  return classes->classes.class_count(level);
}

int32_t cfme_classes_class_of(const cfme_classes* classes, int32_t word, size_t level) {
  if (!classes || level >= classes->classes.levels() || word < 0 ||
      static_cast<std::size_t>(word) >= classes->classes.vocab_size()) {
    return -1;
  }
  return classes->classes.class_of(word, level);
}

void cfme_classes_free(cfme_classes* classes) { delete classes; }

cfme_status cfme_default_level_sizes(const cfme_vocab* vocab, int class_levels, int* sizes_out) {
  return guarded([&] {
    require(vocab && sizes_out, "null argument");
    auto sizes = cfme::default_level_sizes(vocab->vocab.output_count(), class_levels);
    std::copy(sizes.begin(), sizes.end(), sizes_out);
  });
}

cfme_status cfme_features_dump(const cfme_corpus* corpus, const cfme_classes* indicator,
                               int64_t min_count, const char* out_path, size_t* feature_count) {
  return guarded([&] {
    require(corpus && indicator && out_path, "null argument");
    auto set = cfme::instantiate(corpus->events, indicator_map(indicator->classes, corpus->vocab_size),
                                 min_count);
    std::ofstream out(out_path);
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("cannot write ") + out_path);
    set.dump(out);
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("write failed: ") + out_path);
    if (feature_count) *feature_count = set.size();
  });
}

void cfme_train_config_init(cfme_train_config* config) {
  if (!config) return;
  *config = cfme_train_config{};
  config->method = "gis";
  config->indicator_classes = 64;
  config->min_count = 3;
  config->iterations = 100;
  config->tolerance = 1e-4;
  config->seed = 0;
  config->threads = 1;
}

cfme_status cfme_model_train(const cfme_corpus* corpus, const cfme_vocab* vocab,
                             const cfme_classes* hierarchy, const cfme_classes* indicator,
                             const cfme_train_config* config, cfme_model** out) {
  return guarded([&] {
    require(corpus && vocab && config && out, "null argument");
    require(config->method != nullptr, "missing method");
    require(corpus->vocab_size == vocab->vocab.size(), "corpus was loaded with another vocabulary");
    auto method = cfme::method_from_name(config->method);
    if (!method) {
      cfme::fail(cfme::ErrorCode::kInvalidArgument,
                 std::string("unknown method '") + config->method + "'");
    }
    const auto& v = vocab->vocab;
    cfme::ClassHierarchy indicator_classes =
        indicator ? indicator->classes
                  : cfme::induce_indicator_map(corpus->events, v, config->indicator_classes,
                                               config->seed);

    std::optional<cfme::ClassHierarchy> classes;
    const int levels = cfme::class_levels(*method);
    if (levels > 0) {
      if (hierarchy) {
        require(hierarchy->classes.levels() == static_cast<std::size_t>(levels),
                "class map depth does not match the method");
        classes = hierarchy->classes;
      } else {
        auto sizes = cfme::default_level_sizes(v.output_count(), levels);
        for (int k = 0; k < levels; ++k) {
          if (config->level_sizes[k] > 0) sizes[static_cast<std::size_t>(k)] = config->level_sizes[k];
        }
        cfme::InductionOptions o;
        o.seed = config->seed;
        classes = cfme::build_hierarchy(corpus->events, v, sizes, o);
      }
    }
    auto problem = cfme::prepare_factored(corpus->events, v, std::move(classes),
                                          indicator_map(indicator_classes, v.size()),
                                          config->min_count);
    auto gis = gis_options(*config);
    gis.unigram_cache = cfme::uses_unigram_cache(*method);
    auto log = cfme::train_factored(problem, gis);

    auto m = std::make_unique<cfme_model>();
    m->bundle.method = *method;
    m->bundle.vocab = v;
    m->bundle.indicator = std::move(indicator_classes);
    m->bundle.model = std::move(problem.model);
    m->vocab.vocab = v;
    m->log = std::move(log);
    *out = m.release();
  });
}

cfme_status cfme_model_save(const cfme_model* model, const char* dir) {
  return guarded([&] {
    require(model && dir, "null argument");
    cfme::save_bundle(std::filesystem::path(dir), model->bundle);
  });
}

cfme_status cfme_model_load(const char* dir, cfme_model** out) {
  return guarded([&] {
    require(dir && out, "null argument");
    auto m = std::make_unique<cfme_model>();
    m->bundle = cfme::load_bundle(std::filesystem::path(dir));
    m->vocab.vocab = m->bundle.vocab;
    *out = m.release();
  });
}

const char* cfme_model_method(const cfme_model* model) {
  return model ? cfme::method_name(model->bundle.method).data() : nullptr;
}

size_t cfme_model_level_count(const cfme_model* model) {
  return model ? model->bundle.model.level_count() : 0;
}

const cfme_vocab* cfme_model_vocab(const cfme_model* model) {
  return model ? &model->vocab : nullptr;
}

cfme_status cfme_model_probability(const cfme_model* model, int32_t w2, int32_t w1, int32_t word,
                                   double* out) {
  return guarded([&] {
    require(model && out, "null argument");
    const auto n = static_cast<int32_t>(model->bundle.vocab.size());
    require(w2 >= 0 && w2 < n && w1 >= 0 && w1 < n && word >= 0 && word < n,
            "word id out of range");
    *out = model->bundle.model.probability(cfme::History{w2, w1}, word);
  });
}

cfme_status cfme_model_train_summary(const cfme_model* model, cfme_train_summary* out) {
  return guarded([&] {
    require(model && out, "null argument");
    require(model->log.has_value(), "model has no training log (it was loaded from disk)");
    const auto& log = *model->log;
    cfme_train_summary s{};
    for (const auto& level : log.levels) {
      s.iterations = std::max(s.iterations, static_cast<int>(level.iterations.size()));
      if (!level.iterations.empty()) {
        s.final_loglike += level.iterations.back().loglike;
        s.max_deviation = std::max(s.max_deviation, level.iterations.back().max_deviation);
      }
    }
    s.converged = log.converged() ? 1 : 0;
    s.ops_per_event = log.ops_per_event();
    s.sec_per_iter = log.seconds_per_iteration();
    *out = s;
  });
}

cfme_status cfme_model_write_train_log(const cfme_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    require(model->log.has_value(), "model has no training log (it was loaded from disk)");
    std::ofstream out(path);
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("cannot write ") + path);
    out << "level\titeration\tloglike\top_count\tmax_deviation\tseconds\n";
    out.precision(10);
    for (std::size_t k = 0; k < model->log->levels.size(); ++k) {
      for (const auto& it : model->log->levels[k].iterations) {
        out << k << '\t' << it.iteration << '\t' << it.loglike << '\t' << it.op_count << '\t'
            << it.max_deviation << '\t' << it.seconds << '\n';
      }
    }
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("write failed: ") + path);
  });
}

void cfme_model_free(cfme_model* model) { delete model; }

void cfme_eval_config_init(cfme_eval_config* config) {
  if (!config) return;
  *config = cfme_eval_config{};
  config->alpha_method = "em";
  config->alpha = 1.0;
}

cfme_status cfme_eval(const cfme_model* model, const cfme_eval_config* config,
                      cfme_eval_result* out) {
  return guarded([&] {
    require(model && config && out, "null argument");
    const auto& vocab = model->bundle.vocab;
    auto test = read_stream(config->test_path, vocab, config->lowercase);
    cfme::FactoredConditional maxent(model->bundle.model);

    cfme_eval_result r{};
    r.alpha = 1.0;
    r.alpha_method = "none";
    r.maxent_perplexity = cfme::perplexity(maxent, test).perplexity;

    std::optional<cfme::TrigramLM> trigram;
    if (config->interpolate) {
      require(config->trigram_path != nullptr, "interpolation needs the trigram training text");
      trigram = cfme::train_trigram(read_stream(config->trigram_path, vocab, config->lowercase),
                                    vocab);
      r.trigram_perplexity = cfme::perplexity(*trigram, test).perplexity;
      const std::string how = config->alpha_method ? config->alpha_method : "em";
      if (how == "fixed") {
        r.alpha = config->alpha;
        r.alpha_method = "fixed";
      } else {
        require(how == "em" || how == "grid", "alpha method must be em, grid or fixed");
        auto fit_text = config->alpha_data_path
                            ? read_stream(config->alpha_data_path, vocab, config->lowercase)
                            : test;
        auto pa = cfme::position_probabilities(maxent, fit_text);
        auto pb = cfme::position_probabilities(*trigram, fit_text);
        auto fit = how == "em" ? cfme::fit_alpha_em(pa, pb) : cfme::fit_alpha_grid(pa, pb);
        r.alpha = fit.alpha;
        r.alpha_method = fit.method == cfme::AlphaMethod::kEm ? "em" : "grid";
      }
    }

    std::ofstream token_log;
    if (config->token_log_path) {
      token_log.open(config->token_log_path);
      if (!token_log) {
        cfme::fail(cfme::ErrorCode::kIo, std::string("cannot write ") + config->token_log_path);
      }
    }
    std::ostream* log = config->token_log_path ? &token_log : nullptr;
    cfme::PerplexityResult res;
    if (trigram) {
      cfme::InterpolatedModel mixed(maxent, *trigram, r.alpha);
      res = cfme::perplexity(mixed, test, &vocab, log);
    } else {
      res = cfme::perplexity(maxent, test, &vocab, log);
    }
    if (log && !token_log) cfme::fail(cfme::ErrorCode::kIo, "token log write failed");
    r.perplexity = res.perplexity;
    r.log_sum = res.log_sum;
    r.positions = res.positions;
    *out = r;
  });
}

void cfme_bench_config_init(cfme_bench_config* config) {
  if (!config) return;
  *config = cfme_bench_config{};
  config->methods = "gis,gis-cache,factored2";
  config->max_vocab = 60000;
  config->min_count = 3;
  config->indicator_classes = 64;
  config->iterations = 2;
  config->threads = 1;
}

cfme_status cfme_bench_run(const cfme_bench_config* config, cfme_bench_report** out) {
  return guarded([&] {
    require(config && out && config->corpus_path && config->methods, "null argument");
    require(config->sizes != nullptr || config->size_count == 0, "null sizes");
    cfme::BenchConfig c;
    std::stringstream methods(config->methods);
    std::string name;
    while (std::getline(methods, name, ',')) {
      auto m = cfme::method_from_name(name);
      if (!m) cfme::fail(cfme::ErrorCode::kInvalidArgument, "unknown method '" + name + "'");
      c.methods.push_back(*m);
    }
    c.sizes.assign(config->sizes, config->sizes + config->size_count);
    c.max_vocab = config->max_vocab;
    c.min_count = config->min_count;
    c.indicator_classes = config->indicator_classes;
    c.iterations = config->iterations;
    c.seed = config->seed;
    c.threads = config->threads;
    c.corpus = corpus_options(config->lowercase);

    std::ifstream in(config->corpus_path);
    if (!in) cfme::fail(cfme::ErrorCode::kIo, std::string("cannot read ") + config->corpus_path);
    auto lines = cfme::read_lines(in);
    std::ofstream log;
    if (config->log_path) {
      log.open(config->log_path);
      if (!log) cfme::fail(cfme::ErrorCode::kIo, std::string("cannot write ") + config->log_path);
    }
    auto report = cfme::benchmark(lines, c, config->log_path ? &log : nullptr);
    *out = new cfme_bench_report{std::move(report)};
  });
}

size_t cfme_bench_row_count(const cfme_bench_report* report) {
  return report ? report->report.rows.size() : 0;
}

cfme_status cfme_bench_row_get(const cfme_bench_report* report, size_t index,
                               cfme_bench_row* out) {
  return guarded([&] {
    require(report && out, "null argument");
    require(index < report->report.rows.size(), "row index out of range");
    const auto& r = report->report.rows[index];
    *out = cfme_bench_row{cfme::method_name(r.method).data(),
                          r.train_size,
                          r.sec_per_iter,
                          r.ops_per_event,
                          r.relative_speed,
                          r.sec_min,
                          r.sec_max,
                          r.vocab_size};
  });
}

cfme_status cfme_bench_write_tsv(const cfme_bench_report* report, const char* path) {
  return guarded([&] {
    require(report && path, "null argument");
    if (std::string(path) == "-") {
      report->report.write_tsv(std::cout);
      std::cout.flush();
      return;
    }
    std::ofstream out(path);
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("cannot write ") + path);
    report->report.write_tsv(out);
    if (!out) cfme::fail(cfme::ErrorCode::kIo, std::string("write failed: ") + path);
  });
}

void cfme_bench_report_free(cfme_bench_report* report) { delete report; }

cfme_status cfme_sweep_class_count(const cfme_corpus* corpus, const cfme_vocab* vocab,
                                   const cfme_classes* indicator, const int* candidates,
                                   size_t candidate_count, int64_t min_count, uint64_t seed,
                                   int* best, double* ops_per_event) {
  return guarded([&] {
    require(corpus && vocab && candidates && best, "null argument");
    const auto& v = vocab->vocab;
    require(corpus->vocab_size == v.size(), "corpus was loaded with another vocabulary");
    cfme::ClassHierarchy ind =
        indicator ? indicator->classes : cfme::induce_indicator_map(corpus->events, v, 64, seed);
    cfme::InductionOptions o;
    o.seed = seed;
    auto result = cfme::sweep_class_count(
        corpus->events, v, std::span<const int>(candidates, candidate_count),
        indicator_map(ind, v.size()), min_count,
        [&](int c) { return cfme::induce_classes(corpus->events, v, c, o); });
    *best = result.best;
    if (ops_per_event) {
      for (std::size_t i = 0; i < result.table.size(); ++i) {
        ops_per_event[i] = result.table[i].ops_per_event;
      }
    }
  });
}

void cfme_synth_config_init(cfme_synth_config* config) {
  if (!config) return;
  cfme::SynthConfig d;
  *config = cfme_synth_config{d.tokens,     d.vocab_size, d.classes,    d.successors,
                              d.zipf,       d.min_length, d.max_length, d.seed};
}

cfme_status cfme_synth_corpus(const cfme_synth_config* config, const char* path,
                              size_t* tokens_written) {
  return guarded([&] {
    require(config && path, "null argument");
    cfme::SynthConfig c;
    c.tokens = config->tokens;
    c.vocab_size = config->vocab_size;
    c.classes = config->classes;
    c.successors = config->successors;
    c.zipf = config->zipf;
    c.min_length = config->min_length;
    c.max_length = config->max_length;
    c.seed = config->seed;
    auto n = cfme::generate_corpus(c, std::filesystem::path(path));
    if (tokens_written) *tokens_written = n;
  });
}

}  // extern "C"
