// Command-line front end over the cfme C API.

#include <cfme/cfme.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct RuntimeFailure {
  cfme_status status;
  std::string message;
};

void check(cfme_status status) {
  if (status != CFME_OK) throw RuntimeFailure{status, cfme_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using VocabPtr = std::unique_ptr<cfme_vocab, Deleter<cfme_vocab, cfme_vocab_free>>;
using CorpusPtr = std::unique_ptr<cfme_corpus, Deleter<cfme_corpus, cfme_corpus_free>>;
using ClassesPtr = std::unique_ptr<cfme_classes, Deleter<cfme_classes, cfme_classes_free>>;
using ModelPtr = std::unique_ptr<cfme_model, Deleter<cfme_model, cfme_model_free>>;
using BenchPtr =
    std::unique_ptr<cfme_bench_report, Deleter<cfme_bench_report, cfme_bench_report_free>>;

VocabPtr load_vocab(const std::string& path) {
  cfme_vocab* v = nullptr;
  check(cfme_vocab_load(path.c_str(), &v));
  return VocabPtr(v);
}

VocabPtr build_vocab(const std::string& corpus, std::size_t max_vocab, bool lowercase) {
  cfme_vocab* v = nullptr;
  check(cfme_vocab_build(corpus.c_str(), max_vocab, lowercase, &v));
  return VocabPtr(v);
}

CorpusPtr load_corpus(const cfme_vocab* vocab, const std::string& path, bool lowercase) {
  cfme_corpus* c = nullptr;
  check(cfme_corpus_load(vocab, path.c_str(), lowercase, &c));
  return CorpusPtr(c);
}

ClassesPtr load_classes(const std::string& path, const cfme_vocab* vocab) {
  cfme_classes* c = nullptr;
  check(cfme_classes_load(path.c_str(), vocab, &c));
  return ClassesPtr(c);
}

ClassesPtr induce(const cfme_corpus* corpus, const cfme_vocab* vocab,
                  const std::vector<int>& sizes, std::uint64_t seed) {
  cfme_classes* c = nullptr;
  check(cfme_classes_induce(corpus, vocab, sizes.data(), sizes.size(), seed, &c));
  return ClassesPtr(c);
}

// Indicator classes cannot outnumber the predicted words.
ClassesPtr indicator_classes(const cfme_corpus* corpus, const cfme_vocab* vocab,
                             const std::string& map_path, int count, std::uint64_t seed) {
  if (!map_path.empty()) return load_classes(map_path, vocab);
  int outputs = static_cast<int>(cfme_vocab_size(vocab)) - 2;
  return induce(corpus, vocab, {std::min(count, outputs)}, seed);
}

// The resolved options of the subcommand that ran, loadable with --config.
void echo_config(const CLI::App* sub, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure{CFME_ERR_IO, "cannot write " + path.string()};
  out << '[' << sub->get_name() << "]\n" << sub->config_to_str(true, false);
}

std::filesystem::path sibling_config(const std::string& output) {
  return std::filesystem::path(output + ".config.toml");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-factored maximum entropy language model trainer"};
  app.set_config("--config", "", "Rerun from an echoed configuration file");
  app.require_subcommand(1);

  bool lowercase = false;
  std::string corpus, vocab_path, out, classes_path, indicator_path, method = "gis";
  std::size_t max_vocab = 60000;
  std::int64_t min_count = 3;
  int indicator_count = 64, iterations = 100, threads = 1, class_levels = 1;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  std::vector<int> level_sizes;

  auto add_lowercase = [&](CLI::App* s) {
    s->add_flag("--lowercase", lowercase, "Lowercase ASCII letters before lookup");
  };
  auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", seed, "Seed for class induction")->capture_default_str();
  };
  auto add_threads = [&](CLI::App* s) {
    s->add_option("--threads", threads, "Worker threads for the GIS expectation pass")
        ->envname("MAXENT_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  // build-vocab
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the vocabulary from a corpus");
  vocab_cmd->configurable();
  vocab_cmd->add_option("--corpus", corpus, "Training text, one sentence per line")->required();
  vocab_cmd->add_option("--out", out, "Vocabulary file to write")->required();
  vocab_cmd->add_option("--max-vocab", max_vocab, "Content words kept")->capture_default_str();
  add_lowercase(vocab_cmd);

  // induce-classes
  auto* classes_cmd =
      app.add_subcommand("induce-classes", "Induce a nested word-class hierarchy");
  classes_cmd->configurable();
  classes_cmd->add_option("--corpus", corpus, "Training text")->required();
  classes_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  classes_cmd->add_option("--out", out, "Class-map file to write")->required();
  classes_cmd->add_option("--level-sizes", level_sizes,
                          "Class counts per level, coarsest first (default from vocabulary size)")
      ->delimiter(',');
  classes_cmd->add_option("--class-levels", class_levels, "Levels when --level-sizes is absent")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  add_seed(classes_cmd);
  add_lowercase(classes_cmd);

  // extract-features
  auto* features_cmd =
      app.add_subcommand("extract-features", "Instantiate and dump the word-level features");
  features_cmd->configurable();
  features_cmd->add_option("--corpus", corpus, "Training text")->required();
  features_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  features_cmd->add_option("--out", out, "Feature dump to write")->required();
  features_cmd->add_option("--indicator-map", indicator_path,
                           "Class map for history conditioning (default: induced)");
  features_cmd->add_option("--indicator-classes", indicator_count, "Induced indicator classes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  features_cmd->add_option("--min-count", min_count, "Feature count threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed(features_cmd);
  add_lowercase(features_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a model directory");
  train_cmd->configurable();
  train_cmd->add_option("--corpus", corpus, "Training text")->required();
  train_cmd->add_option("--out", out, "Model directory to write")->required();
  train_cmd->add_option("--vocab", vocab_path, "Vocabulary file (default: built from corpus)");
  train_cmd->add_option("--max-vocab", max_vocab, "Content words kept when building")
      ->capture_default_str();
  train_cmd->add_option("--method", method, "gis, gis-cache, factored2 or factored3")
      ->check(CLI::IsMember({"gis", "gis-cache", "factored2", "factored3"}))
      ->capture_default_str();
  train_cmd->add_option("--level-sizes", level_sizes,
                        "Class counts per level for the factored methods")
      ->delimiter(',');
  train_cmd->add_option("--classes", classes_path, "Factoring class map (default: induced)");
  train_cmd->add_option("--indicator-map", indicator_path,
                        "Class map for history conditioning (default: induced)");
  train_cmd->add_option("--indicator-classes", indicator_count, "Induced indicator classes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--min-count", min_count, "Feature count threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--iterations", iterations, "GIS iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--tolerance", tolerance, "Stop when every constraint is this close")
      ->capture_default_str();
  add_seed(train_cmd);
  add_threads(train_cmd);
  add_lowercase(train_cmd);

  // eval
  std::string model_dir, test_path, trigram_path, alpha_method = "em", alpha_data, token_log;
  double alpha = 1.0;
  bool interpolate = false;
  auto* eval_cmd = app.add_subcommand("eval", "Perplexity of a model on test text");
  eval_cmd->configurable();
  eval_cmd->add_option("--model", model_dir, "Model directory")->required();
  eval_cmd->add_option("--test", test_path, "Test text")->required();
  eval_cmd->add_flag("--interpolate", interpolate, "Mix with a trigram model");
  eval_cmd->add_option("--trigram-corpus", trigram_path, "Trigram training text");
  eval_cmd->add_option("--alpha-method", alpha_method, "em, grid or fixed")
      ->check(CLI::IsMember({"em", "grid", "fixed"}))
      ->capture_default_str();
  eval_cmd->add_option("--alpha", alpha, "Maxent weight when --alpha-method fixed")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval_cmd->add_option("--alpha-data", alpha_data, "Text for fitting alpha (default: test text)");
  eval_cmd->add_option("--token-log", token_log, "Write position, word, logprob per token");
  eval_cmd->add_option("--out", out, "Also write the report to this file");
  add_lowercase(eval_cmd);

  // bench
  std::vector<std::size_t> sizes;
  std::string methods = "gis,gis-cache,factored2", bench_log;
  int bench_iterations = 2;
  auto* bench_cmd = app.add_subcommand("bench", "Per-iteration training cost across sizes");
  bench_cmd->configurable();
  bench_cmd->add_option("--corpus", corpus, "Text to take training prefixes from")->required();
  bench_cmd->add_option("--sizes", sizes, "Training sizes in tokens, ascending")
      ->delimiter(',')
      ->required();
  bench_cmd->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  bench_cmd->add_option("--iterations", bench_iterations, "Timed iterations per run")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--max-vocab", max_vocab, "Content words kept")->capture_default_str();
  bench_cmd->add_option("--min-count", min_count, "Feature count threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--indicator-classes", indicator_count, "Induced indicator classes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--out", out, "TSV report (default: standard output)");
  bench_cmd->add_option("--log", bench_log, "Progress log with timing spread and setup costs");
  add_seed(bench_cmd);
  add_threads(bench_cmd);
  add_lowercase(bench_cmd);

  // sweep-classes
  std::vector<int> candidates;
  auto* sweep_cmd = app.add_subcommand(
      "sweep-classes", "Pick the class count whose factored GIS iteration is cheapest");
  sweep_cmd->configurable();
  sweep_cmd->add_option("--corpus", corpus, "Training text")->required();
  sweep_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  sweep_cmd->add_option("--candidates", candidates, "Class counts to try")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--indicator-map", indicator_path,
                        "Class map for history conditioning (default: induced)");
  sweep_cmd->add_option("--min-count", min_count, "Feature count threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_seed(sweep_cmd);
  add_lowercase(sweep_cmd);

  // synth
  cfme_synth_config synth;
  cfme_synth_config_init(&synth);
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic class-chain corpus");
  synth_cmd->configurable();
  synth_cmd->add_option("--out", out, "Corpus file to write")->required();
  synth_cmd->add_option("--tokens", synth.tokens, "Minimum tokens")->capture_default_str();
  synth_cmd->add_option("--vocab-size", synth.vocab_size, "Distinct words")->capture_default_str();
  synth_cmd->add_option("--classes", synth.classes, "Latent classes")->capture_default_str();
  synth_cmd->add_option("--successors", synth.successors, "Successor classes per class")
      ->capture_default_str();
  synth_cmd->add_option("--zipf", synth.zipf, "Within-class Zipf exponent")
      ->capture_default_str();
  synth_cmd->add_option("--min-length", synth.min_length, "Shortest sentence")
      ->capture_default_str();
  synth_cmd->add_option("--max-length", synth.max_length, "Longest sentence")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*vocab_cmd) {
      auto vocab = build_vocab(corpus, max_vocab, lowercase);
      check(cfme_vocab_save(vocab.get(), out.c_str()));
      std::cout << "vocabulary: " << cfme_vocab_size(vocab.get()) << " ids\n";
      echo_config(vocab_cmd, sibling_config(out));
    } else if (*classes_cmd) {
      auto vocab = load_vocab(vocab_path);
      auto text = load_corpus(vocab.get(), corpus, lowercase);
      std::vector<int> levels = level_sizes;
      if (levels.empty()) {
        levels.resize(static_cast<std::size_t>(class_levels));
        check(cfme_default_level_sizes(vocab.get(), class_levels, levels.data()));
      }
      auto classes = induce(text.get(), vocab.get(), levels, seed);
      check(cfme_classes_save(classes.get(), vocab.get(), out.c_str()));
      std::cout << "classes:";
      for (std::size_t k = 0; k < cfme_classes_levels(classes.get()); ++k) {
        std::cout << ' ' << cfme_classes_count(classes.get(), k);
      }
      std::cout << '\n';
      echo_config(classes_cmd, sibling_config(out));
    } else if (*features_cmd) {
      auto vocab = load_vocab(vocab_path);
      auto text = load_corpus(vocab.get(), corpus, lowercase);
      auto ind = indicator_classes(text.get(), vocab.get(), indicator_path, indicator_count, seed);
      std::size_t n = 0;
      check(cfme_features_dump(text.get(), ind.get(), min_count, out.c_str(), &n));
      std::cout << "features: " << n << '\n';
      echo_config(features_cmd, sibling_config(out));
    } else if (*train_cmd) {
      auto vocab = vocab_path.empty() ? build_vocab(corpus, max_vocab, lowercase)
                                      : load_vocab(vocab_path);
      auto text = load_corpus(vocab.get(), corpus, lowercase);
      ClassesPtr hierarchy;
      if (!classes_path.empty()) hierarchy = load_classes(classes_path, vocab.get());
      ClassesPtr indicator;
      if (!indicator_path.empty()) indicator = load_classes(indicator_path, vocab.get());
      cfme_train_config config;
      cfme_train_config_init(&config);
      config.method = method.c_str();
      for (std::size_t k = 0; k < level_sizes.size() && k < 2; ++k) {
        config.level_sizes[k] = level_sizes[k];
      }
      if (level_sizes.size() > 2) throw CLI::ValidationError("--level-sizes", "at most 2 values");
      config.indicator_classes = indicator_count;
      config.min_count = min_count;
      config.iterations = iterations;
      config.tolerance = tolerance;
      config.seed = seed;
      config.threads = threads;
      cfme_model* raw = nullptr;
      check(cfme_model_train(text.get(), vocab.get(), hierarchy.get(), indicator.get(), &config,
                             &raw));
      ModelPtr model(raw);
      check(cfme_model_save(model.get(), out.c_str()));
      const auto dir = std::filesystem::path(out);
      check(cfme_model_write_train_log(model.get(), (dir / "train_log.tsv").c_str()));
      cfme_train_summary s;
      check(cfme_model_train_summary(model.get(), &s));
      std::cout << "method: " << method << "\niterations: " << s.iterations
                << "\nconverged: " << (s.converged ? "yes" : "no")
                << "\nmax_deviation: " << s.max_deviation << "\nloglike: " << s.final_loglike
                << "\nops_per_event: " << s.ops_per_event << "\nsec_per_iter: " << s.sec_per_iter
                << '\n';
      echo_config(train_cmd, dir / "config.toml");
    } else if (*eval_cmd) {
      cfme_model* raw = nullptr;
      check(cfme_model_load(model_dir.c_str(), &raw));
      ModelPtr model(raw);
      cfme_eval_config config;
      cfme_eval_config_init(&config);
      config.test_path = test_path.c_str();
      config.lowercase = lowercase;
      config.interpolate = interpolate;
      if (interpolate && trigram_path.empty()) {
        throw CLI::ValidationError("--interpolate", "requires --trigram-corpus");
      }
      config.trigram_path = trigram_path.empty() ? nullptr : trigram_path.c_str();
      config.alpha_method = alpha_method.c_str();
      config.alpha = alpha;
      config.alpha_data_path = alpha_data.empty() ? nullptr : alpha_data.c_str();
      config.token_log_path = token_log.empty() ? nullptr : token_log.c_str();
      cfme_eval_result r;
      check(cfme_eval(model.get(), &config, &r));
      std::ostringstream report;
      report.precision(10);
      report << "positions: " << r.positions << "\nperplexity: " << r.perplexity
             << "\nmaxent_perplexity: " << r.maxent_perplexity;
      if (interpolate) {
        report << "\ntrigram_perplexity: " << r.trigram_perplexity << "\nalpha: " << r.alpha
               << "\nalpha_method: " << r.alpha_method;
      }
      report << '\n';
      std::cout << report.str();
      if (!out.empty()) {
        std::ofstream f(out);
        if (!(f << report.str())) throw RuntimeFailure{CFME_ERR_IO, "cannot write " + out};
        echo_config(eval_cmd, sibling_config(out));
      }
    } else if (*bench_cmd) {
      cfme_bench_config config;
      cfme_bench_config_init(&config);
      config.corpus_path = corpus.c_str();
      config.methods = methods.c_str();
      config.sizes = sizes.data();
      config.size_count = sizes.size();
      config.max_vocab = max_vocab;
      config.min_count = min_count;
      config.indicator_classes = indicator_count;
      config.iterations = bench_iterations;
      config.seed = seed;
      config.threads = threads;
      config.lowercase = lowercase;
      config.log_path = bench_log.empty() ? nullptr : bench_log.c_str();
      cfme_bench_report* raw = nullptr;
      check(cfme_bench_run(&config, &raw));
      BenchPtr report(raw);
      check(cfme_bench_write_tsv(report.get(), out.empty() ? "-" : out.c_str()));
      if (!out.empty()) echo_config(bench_cmd, sibling_config(out));
    } else if (*sweep_cmd) {
      auto vocab = load_vocab(vocab_path);
      auto text = load_corpus(vocab.get(), corpus, lowercase);
      auto ind = indicator_classes(text.get(), vocab.get(), indicator_path, 64, seed);
      int best = 0;
      std::vector<double> ops(candidates.size());
      check(cfme_sweep_class_count(text.get(), vocab.get(), ind.get(), candidates.data(),
                                   candidates.size(), min_count, seed, &best, ops.data()));
      std::cout << "classes\tops_per_event\n";
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        std::cout << candidates[i] << '\t' << ops[i] << '\n';
      }
      std::cout << "best: " << best << '\n';
    } else if (*synth_cmd) {
      std::size_t written = 0;
      check(cfme_synth_corpus(&synth, out.c_str(), &written));
      std::cout << "tokens: " << written << '\n';
      echo_config(synth_cmd, sibling_config(out));
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error (" << cfme_status_name(e.status) << "): " << e.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
