#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "factored.hpp"

namespace cfme {

struct BenchConfig {
  std::vector<Method> methods;
  std::vector<std::size_t> sizes;  // training tokens, ascending
  std::size_t max_vocab = 60000;
  std::int64_t min_count = 3;
  int indicator_classes = 64;
  int iterations = 2;  // timed GIS iterations per run
  std::uint64_t seed = 0;
  int threads = 1;
  CorpusOptions corpus;
};

struct BenchRow {
  Method method = Method::kGis;
  std::size_t train_size = 0;
  double sec_per_iter = 0.0;
  double ops_per_event = 0.0;
  double relative_speed = 1.0;
  // Not in the TSV: fastest and slowest timed iteration, vocabulary size and
  // the untimed setup cost (class induction and feature instantiation).
  double sec_min = 0.0;
  double sec_max = 0.0;
  std::size_t vocab_size = 0;
  double setup_seconds = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  // `method<TAB>train_size<TAB>sec_per_iter<TAB>ops_per_event<TAB>relative_speed`.
  void write_tsv(std::ostream& out) const;
};

// For each size: vocabulary, indicator classes and factoring classes are
// rebuilt from that prefix of the corpus, then each method is trained for the
// configured number of iterations. Relative speed is against `gis` at the same
// size when it is benchmarked, otherwise against the first method. Progress
// goes to `log` when given.
BenchReport benchmark(const std::vector<std::string>& corpus_lines, const BenchConfig& config,
                      std::ostream* log = nullptr);

std::vector<std::string> read_lines(std::istream& in);

}  // namespace cfme
