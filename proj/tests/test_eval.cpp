#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "bench.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace cfme;

namespace {

class UniformModel : public ConditionalModel {
 public:
  explicit UniformModel(std::size_t outputs) : p_(1.0 / static_cast<double>(outputs)) {}
  double probability(const History&, WordId word) const override {
    return word >= Vocabulary::kUnknown ? p_ : 0.0;
  }

 private:
  double p_;
};

// First-order chain with a fixed random transition table over predicted words.
class ChainModel : public ConditionalModel {
 public:
  ChainModel(const Vocabulary& v, std::mt19937_64& rng) : first_(v.first_output()) {
    const std::size_t n = v.output_count();
    std::gamma_distribution<double> g(0.4, 1.0);
    rows_.assign(n + 1, std::vector<double>(n));
    for (auto& row : rows_) {
      double sum = 0.0;
      for (auto& x : row) sum += (x = g(rng) + 1e-4);
      for (auto& x : row) x /= sum;
    }
  }
  double probability(const History& h, WordId word) const override {
    if (word < first_) return 0.0;
    return row(h.w1)[static_cast<std::size_t>(word - first_)];
  }
  TokenStream sample(std::mt19937_64& rng, int sentences, int length) const {
    TokenStream s;
    for (int i = 0; i < sentences; ++i) {
      std::vector<WordId> sentence;
      WordId prev = Vocabulary::kSentenceStart;
      for (int j = 0; j < length; ++j) {
        const auto& r = row(prev);
        std::discrete_distribution<int> d(r.begin(), r.end());
        prev = static_cast<WordId>(d(rng)) + first_;
        sentence.push_back(prev);
      }
      s.sentences.push_back(std::move(sentence));
    }
    return s;
  }

 private:
  const std::vector<double>& row(WordId prev) const {
    return prev < first_ ? rows_.back() : rows_[static_cast<std::size_t>(prev - first_)];
  }
  WordId first_;
  std::vector<std::vector<double>> rows_;
};

TokenStream stream_of(const std::string& text, const Vocabulary& v) {
  std::istringstream in(text);
  return tokenize(in, v);
}

}  // namespace

TEST_CASE("trigram on one repeated sentence") {
  std::string text;
  for (int i = 0; i < 30; ++i) text += "the cat sat on the mat\n";
  std::istringstream in(text);
  auto v = build_vocabulary(in, 100);
  auto s = stream_of(text, v);
  auto lm = train_trigram(s, v);
  auto r = perplexity(lm, s);
  CHECK(r.perplexity < 1.2);
  CHECK(r.perplexity >= 1.0);
}

TEST_CASE("trigram on uniform random text approaches k") {
  std::mt19937_64 rng(1);
  auto v = oracle::numbered_vocab(20);  // <unk> never occurs
  auto train = oracle::random_stream(rng, v, 20000, 5, 15);
  auto test = oracle::random_stream(rng, v, 2000, 5, 15);
  auto lm = train_trigram(train, v);
  double ppl = perplexity(lm, test).perplexity;
  CHECK(ppl == doctest::Approx(20.0).epsilon(0.03));
  CHECK(ppl > 20.0);
}

TEST_CASE("trigram distributions sum to one") {
  std::mt19937_64 rng(2);
  auto v = oracle::numbered_vocab(15);
  auto lm = train_trigram(oracle::random_stream(rng, v, 200, 1, 8), v);
  CHECK(lm.weights().unigram > 0.0);
  CHECK(lm.weights().trigram < 1.0);
  std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(v.size() - 1));
  for (int i = 0; i < 200; ++i) {
    History h{word(rng), word(rng)};
    double sum = 0.0;
    for (std::size_t w = 0; w < v.size(); ++w) {
      double p = lm.probability(h, static_cast<WordId>(w));
      if (v.is_output(static_cast<WordId>(w))) {
        CHECK(p > 0.0);
      } else {
        CHECK(p == 0.0);
      }
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("trigram needs ten sentences") {
  auto v = oracle::numbered_vocab(3);
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(train_trigram(oracle::random_stream(rng, v, 9, 1, 3), v), Error);
}

TEST_CASE("uniform model perplexity is the number of predicted words") {
  auto v = oracle::numbered_vocab(49);
  std::mt19937_64 rng(4);
  auto s = oracle::random_stream(rng, v, 50, 1, 10);
  UniformModel u(v.output_count());
  CHECK(perplexity(u, s).perplexity == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("token log replays to the same perplexity") {
  std::mt19937_64 rng(5);
  auto v = oracle::numbered_vocab(20);
  auto lm = train_trigram(oracle::random_stream(rng, v, 300, 1, 8), v);
  auto test = oracle::random_stream(rng, v, 40, 0, 8);
  std::stringstream log;
  auto r = perplexity(lm, test, &v, &log);
  std::string line;
  double sum = 0.0;
  std::int64_t n = 0;
  while (std::getline(log, line)) {
    std::istringstream f(line);
    std::int64_t pos;
    std::string word;
    double lp;
    f >> pos >> word >> lp;
    CHECK(pos == n);
    sum += lp;
    ++n;
  }
  CHECK(n == r.positions);
  CHECK(n == static_cast<std::int64_t>(test.token_count()));
  CHECK(sum == doctest::Approx(r.log_sum).epsilon(1e-15));
  CHECK(std::exp(-sum / static_cast<double>(n)) == doctest::Approx(r.perplexity).epsilon(1e-14));
}

TEST_CASE("zero probability names the position") {
  auto v = oracle::numbered_vocab(4);
  UniformModel u(v.output_count());
  TokenStream s;
  s.sentences.push_back({v.id("w0"), Vocabulary::kSentenceEnd});
  try {
    perplexity(u, s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
    CHECK(std::string(e.what()).find("position 1") != std::string::npos);
  }
}

TEST_CASE("interpolation endpoints and normalization") {
  std::mt19937_64 rng(6);
  auto v = oracle::numbered_vocab(12);
  ChainModel chain(v, rng);
  auto lm = train_trigram(chain.sample(rng, 100, 6), v);
  InterpolatedModel only_a(chain, lm, 1.0);
  InterpolatedModel only_b(chain, lm, 0.0);
  InterpolatedModel mix(chain, lm, 0.3);
  std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(v.size() - 1));
  for (int i = 0; i < 50; ++i) {
    History h{word(rng), word(rng)};
    double sum = 0.0;
    for (std::size_t w = 0; w < v.size(); ++w) {
      auto id = static_cast<WordId>(w);
      CHECK(only_a.probability(h, id) == chain.probability(h, id));
      CHECK(only_b.probability(h, id) == lm.probability(h, id));
      sum += mix.probability(h, id);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  CHECK(interpolate(0.2, 0.6, 0.25) == doctest::Approx(0.5));
}

TEST_CASE("fitted weight favours the true model") {
  std::mt19937_64 rng(7);
  auto v = oracle::numbered_vocab(30);
  ChainModel truth(v, rng);
  auto lm = train_trigram(truth.sample(rng, 100, 10), v);
  auto test = truth.sample(rng, 500, 10);
  auto pa = position_probabilities(truth, test);
  auto pb = position_probabilities(lm, test);
  auto em = fit_alpha_em(pa, pb);
  auto grid = fit_alpha_grid(pa, pb);
  CHECK(em.alpha >= 0.95);
  CHECK(grid.alpha >= 0.95);
  CHECK(em.loglike >= grid.loglike - 1e-9);
  // Swapping the roles flips the weight.
  auto swapped = fit_alpha_em(pb, pa);
  CHECK(swapped.alpha == doctest::Approx(1.0 - em.alpha).epsilon(1e-4));
}

TEST_CASE("perplexity does not depend on sentence order") {
  std::mt19937_64 rng(8);
  auto v = oracle::numbered_vocab(25);
  auto lm = train_trigram(oracle::random_stream(rng, v, 300, 1, 8), v);
  auto test = oracle::random_stream(rng, v, 100, 1, 8);
  auto shuffled = test;
  std::shuffle(shuffled.sentences.begin(), shuffled.sentences.end(), rng);
  CHECK(std::abs(perplexity(lm, test).log_sum - perplexity(lm, shuffled).log_sum) <= 1e-9);
}

TEST_CASE("histories follow the stream") {
  auto v = oracle::numbered_vocab(3);
  auto s = stream_of("w0 w1 w2\nw2\n", v);
  auto hs = stream_histories(s);
  REQUIRE(hs.size() == 4);
  CHECK(hs[0] == History{0, 0});
  CHECK(hs[2] == History{v.id("w0"), v.id("w1")});
  CHECK(hs[3] == History{0, 0});
}

TEST_CASE("benchmark rows and cost cross-check") {
  SynthConfig sc;
  sc.tokens = 12000;
  sc.vocab_size = 600;
  sc.classes = 12;
  sc.seed = 3;
  std::stringstream text;
  generate_corpus(sc, text);
  auto lines = read_lines(text);

  BenchConfig bc;
  bc.methods = {Method::kGis, Method::kGisCache, Method::kFactored2};
  bc.sizes = {4000, 10000};
  bc.iterations = 1;
  bc.seed = 5;
  auto report = benchmark(lines, bc);
  REQUIRE(report.rows.size() == 6);

  for (std::size_t s = 0; s < bc.sizes.size(); ++s) {
    const auto& gis = report.rows[s * 3];
    const auto& cache = report.rows[s * 3 + 1];
    const auto& f2 = report.rows[s * 3 + 2];
    CHECK(gis.method == Method::kGis);
    CHECK(gis.train_size == bc.sizes[s]);
    CHECK(gis.relative_speed == 1.0);
    CHECK(gis.ops_per_event == static_cast<double>(gis.vocab_size - 2));
    CHECK(cache.ops_per_event < gis.ops_per_event);
    CHECK(f2.relative_speed == doctest::Approx(gis.sec_per_iter / f2.sec_per_iter));

    // Rebuild the same prefix and hierarchy and count candidates directly.
    std::string prefix;
    std::size_t taken = 0;
    for (const auto& line : lines) {
      if (taken >= bc.sizes[s]) break;
      prefix += line + "\n";
      std::istringstream words(line);
      std::string w;
      while (words >> w) ++taken;
    }
    std::istringstream in(prefix);
    auto vocab = build_vocabulary(in, bc.max_vocab);
    in.clear();
    in.seekg(0);
    auto events = extract_events(tokenize(in, vocab));
    InductionOptions io;
    io.seed = bc.seed;
    auto sizes = default_level_sizes(vocab.output_count(), 1);
    auto h = build_hierarchy(events, vocab, sizes, io);
    std::vector<double> class_size(h.class_count(0), 0.0);
    for (std::size_t w = 2; w < vocab.size(); ++w) {
      class_size[static_cast<std::size_t>(h.class_of(static_cast<WordId>(w), 0))] += 1.0;
    }
    double word_level = 0.0;
    for (const auto& e : events) word_level += class_size[static_cast<std::size_t>(h.class_of(e.target, 0))];
    double analytic = static_cast<double>(sizes[0]) + word_level / static_cast<double>(events.size());
    CHECK(f2.ops_per_event == doctest::Approx(analytic).epsilon(1e-12));
    CHECK(f2.vocab_size == vocab.size());
  }

  auto again = benchmark(lines, bc);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(again.rows[i].ops_per_event == report.rows[i].ops_per_event);
  }

  std::ostringstream tsv;
  report.write_tsv(tsv);
  std::istringstream tsv_in(tsv.str());
  auto tsv_lines = read_lines(tsv_in);
  REQUIRE(tsv_lines.size() == 7);
  CHECK(tsv_lines[0] == "method\ttrain_size\tsec_per_iter\tops_per_event\trelative_speed");
  CHECK(tsv_lines[1].rfind("gis\t4000\t", 0) == 0);

  BenchConfig too_big = bc;
  too_big.sizes = {1000000};
  CHECK_THROWS_AS(benchmark(lines, too_big), Error);
  BenchConfig unsorted = bc;
  unsorted.sizes = {5000, 4000};
  CHECK_THROWS_AS(benchmark(lines, unsorted), Error);
}
