#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>

#include "error.hpp"

namespace cfme {

namespace {

std::size_t count_tokens(const std::string& line) {
  std::size_t n = 0;
  bool in_token = false;
  for (char ch : line) {
    bool space = ch == ' ' || ch == '\t' || ch == '\r';
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

// Whole lines from the front of the corpus until `budget` tokens are covered.
std::string prefix_text(const std::vector<std::string>& lines, std::size_t budget) {
  std::string text;
  std::size_t taken = 0;
  for (const auto& line : lines) {
    if (taken >= budget) break;
    text += line;
    text += '\n';
    taken += count_tokens(line);
  }
  return text;
}

}  // namespace

void BenchReport::write_tsv(std::ostream& out) const {
  out << "method\ttrain_size\tsec_per_iter\tops_per_event\trelative_speed\n";
  const auto old_precision = out.precision(6);
  for (const auto& r : rows) {
    out << method_name(r.method) << '\t' << r.train_size << '\t' << r.sec_per_iter << '\t'
        << r.ops_per_event << '\t' << r.relative_speed << '\n';
  }
  out.precision(old_precision);
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  if (in.bad()) fail(ErrorCode::kIo, "failed reading corpus");
  return lines;
}

BenchReport benchmark(const std::vector<std::string>& corpus_lines, const BenchConfig& config,
                      std::ostream* log) {
  using clock = std::chrono::steady_clock;
  if (config.methods.empty() || config.sizes.empty()) {
    fail(ErrorCode::kInvalidArgument, "benchmark needs at least one method and one size");
  }
  if (!std::is_sorted(config.sizes.begin(), config.sizes.end())) {
    fail(ErrorCode::kInvalidArgument, "benchmark sizes must be ascending");
  }
  if (config.iterations < 1) fail(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  std::size_t corpus_tokens = 0;
  for (const auto& line : corpus_lines) corpus_tokens += count_tokens(line);
  if (config.sizes.back() > corpus_tokens) {
    fail(ErrorCode::kInvalidArgument, "size " + std::to_string(config.sizes.back()) +
                                          " exceeds the corpus (" +
                                          std::to_string(corpus_tokens) + " tokens)");
  }

  GisOptions gis;
  gis.iterations = config.iterations;
  gis.tolerance = -1.0;  // run every timed iteration
  gis.threads = config.threads;

  BenchReport report;
  for (std::size_t size : config.sizes) {
    auto setup_start = clock::now();
    std::istringstream text(prefix_text(corpus_lines, size));
    auto vocab = build_vocabulary(text, config.max_vocab, config.corpus);
    text.clear();
    text.seekg(0);
    auto stream = tokenize(text, vocab, config.corpus);
    auto events = extract_events(stream);
    auto indicator = induce_indicator_map(events, vocab, config.indicator_classes, config.seed);
    const double shared_setup =
        std::chrono::duration<double>(clock::now() - setup_start).count();
    if (log) {
      *log << "size " << size << ": " << stream.token_count() << " tokens, vocab "
           << vocab.size() << ", " << events.size() << " distinct events, shared setup "
           << shared_setup << " s\n";
    }

    const std::size_t first_row = report.rows.size();
    for (Method method : config.methods) {
      auto t0 = clock::now();
      std::optional<ClassHierarchy> hierarchy;
      if (int levels = class_levels(method); levels > 0) {
        auto sizes = default_level_sizes(vocab.output_count(), levels);
        InductionOptions induction;
        induction.seed = config.seed;
        hierarchy = build_hierarchy(events, vocab, sizes, induction);
      }
      auto problem =
          prepare_factored(events, vocab, std::move(hierarchy), indicator.level_map(0),
                           config.min_count);
      GisOptions run = gis;
      run.unigram_cache = uses_unigram_cache(method);
      const double setup = std::chrono::duration<double>(clock::now() - t0).count();
      auto train_log = train_factored(problem, run);

      BenchRow row;
      row.method = method;
      row.train_size = size;
      row.sec_per_iter = train_log.seconds_per_iteration();
      row.ops_per_event = train_log.ops_per_event();
      row.vocab_size = vocab.size();
      row.setup_seconds = setup + shared_setup;
      std::vector<double> per_iter(static_cast<std::size_t>(config.iterations), 0.0);
      for (const auto& level : train_log.levels) {
        for (std::size_t i = 0; i < level.iterations.size() && i < per_iter.size(); ++i) {
          per_iter[i] += level.iterations[i].seconds;
        }
      }
      row.sec_min = *std::min_element(per_iter.begin(), per_iter.end());
      row.sec_max = *std::max_element(per_iter.begin(), per_iter.end());
      report.rows.push_back(row);
      if (log) {
        *log << "  " << method_name(method) << ": " << row.sec_per_iter << " s/iter (min "
             << row.sec_min << ", max " << row.sec_max << "), " << row.ops_per_event
             << " ops/event, setup " << setup << " s\n";
      }
    }

    const BenchRow* base = &report.rows[first_row];
    for (std::size_t i = first_row; i < report.rows.size(); ++i) {
      if (report.rows[i].method == Method::kGis) base = &report.rows[i];
    }
    const double base_sec = base->sec_per_iter;
    for (std::size_t i = first_row; i < report.rows.size(); ++i) {
      auto& row = report.rows[i];
      row.relative_speed = &row == base ? 1.0
                           : row.sec_per_iter > 0.0 ? base_sec / row.sec_per_iter
                                                    : 0.0;
    }
  }
  return report;
}

}  // namespace cfme
