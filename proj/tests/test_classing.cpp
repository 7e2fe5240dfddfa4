#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "classing.hpp"
#include "error.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace cfme;

namespace {

struct Data {
  Vocabulary vocab;
  std::vector<Event> events;
};

Data data_of(const std::string& text) {
  std::istringstream in(text);
  Data d{build_vocabulary(in, 1000), {}};
  in.clear();
  in.seekg(0);
  d.events = extract_events(tokenize(in, d.vocab));
  return d;
}

Data synthetic(std::size_t tokens, int vocab_size, int classes, std::uint64_t seed) {
  SynthConfig c;
  c.tokens = tokens;
  c.vocab_size = vocab_size;
  c.classes = classes;
  c.seed = seed;
  std::stringstream text;
  generate_corpus(c, text);
  return data_of(text.str());
}

void check_partition(const ClassHierarchy& h, const Vocabulary& v) {
  REQUIRE(h.vocab_size() == v.size());
  for (std::size_t level = 0; level < h.levels(); ++level) {
    std::size_t covered = 0;
    for (std::size_t c = 0; c < h.class_count(level); ++c) {
      auto m = h.members(level, static_cast<ClassId>(c));
      CHECK_FALSE(m.empty());
      covered += m.size();
    }
    CHECK(covered == v.size());
  }
}

// Every finer class maps into one coarser class, checked over all word pairs.
void check_nesting(const ClassHierarchy& h) {
  const auto n = static_cast<WordId>(h.vocab_size());
  for (std::size_t level = 1; level < h.levels(); ++level) {
    for (WordId a = 0; a < n; ++a) {
      for (WordId b = 0; b < n; ++b) {
        if (h.class_of(a, level) == h.class_of(b, level)) {
          CHECK(h.class_of(a, level - 1) == h.class_of(b, level - 1));
        }
      }
    }
  }
}

std::vector<ClassId> output_assignment(const Vocabulary& v, std::uint32_t mask) {
  std::vector<ClassId> class_of(v.size(), 0);
  for (std::size_t u = 0; u < v.output_count(); ++u) {
    class_of[u + static_cast<std::size_t>(v.first_output())] = (mask >> u) & 1u;
  }
  return class_of;
}

double best_two_partition(const Data& d) {
  const auto n = d.vocab.output_count();
  double best = -1e300;
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    best = std::max(best,
                    class_bigram_loglik(d.events, d.vocab, output_assignment(d.vocab, mask)));
  }
  return best;
}

}  // namespace

TEST_CASE("one class and singleton classes") {
  auto d = data_of("a b c a b d\nc d a\nb b a c\n");
  auto one = induce_classes(d.events, d.vocab, 1);
  CHECK(one.class_count(0) == 1);
  check_partition(one, d.vocab);

  const int n = static_cast<int>(d.vocab.output_count());
  auto singletons = induce_classes(d.events, d.vocab, n);
  check_partition(singletons, d.vocab);
  std::set<ClassId> seen;
  for (std::size_t u = 0; u < d.vocab.output_count(); ++u) {
    seen.insert(singletons.class_of(static_cast<WordId>(u + 2), 0));
  }
  CHECK(seen.size() == d.vocab.output_count());
  double objective = class_bigram_loglik(d.events, d.vocab, singletons.level_map(0));
  CHECK(objective == doctest::Approx(oracle::word_bigram_loglik(d.events)).epsilon(1e-12));
}

TEST_CASE("boundary tokens sit in class 0") {
  auto d = data_of("a b c d e f a c e\n");
  auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{2, 4});
  for (std::size_t level = 0; level < 2; ++level) {
    CHECK(h.class_of(Vocabulary::kSentenceStart, level) == 0);
    CHECK(h.class_of(Vocabulary::kSentenceEnd, level) == 0);
  }
}

TEST_CASE("two classes on an alternating corpus reach the exhaustive optimum") {
  auto d = data_of("a b a b c d c d");
  auto h = induce_classes(d.events, d.vocab, 2);
  double got = class_bigram_loglik(d.events, d.vocab, h.level_map(0));
  double best = best_two_partition(d);
  CHECK(got == doctest::Approx(best).epsilon(1e-12));
  const WordId a = d.vocab.id("a"), b = d.vocab.id("b"), c = d.vocab.id("c"),
               dd = d.vocab.id("d");
  CHECK(h.class_of(a, 0) == h.class_of(c, 0));
  CHECK(h.class_of(b, 0) == h.class_of(dd, 0));
  CHECK(h.class_of(a, 0) != h.class_of(b, 0));
}

TEST_CASE("greedy two-way splits against brute force and random partitions") {
  std::mt19937_64 rng(17);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    auto v = oracle::numbered_vocab(8);
    auto stream = oracle::random_stream(rng, v, 12, 2, 7);
    Data d{v, extract_events(stream)};
    auto h = induce_classes(d.events, d.vocab, 2);
    double got = class_bigram_loglik(d.events, d.vocab, h.level_map(0));
    double best = best_two_partition(d);
    CHECK(got <= best + 1e-9);
    worst_gap = std::max(worst_gap, best - got);
    std::uniform_int_distribution<std::uint32_t> mask(1, (1u << v.output_count()) - 2);
    for (int r = 0; r < 20; ++r) {
      double random_obj = class_bigram_loglik(d.events, d.vocab, output_assignment(v, mask(rng)));
      CHECK(got >= random_obj - 1e-9);
    }
  }
  MESSAGE("largest gap to the exhaustive optimum: " << worst_gap);
}

TEST_CASE("objective never decreases during induction") {
  auto d = synthetic(6000, 300, 12, 5);
  InductionStats stats;
  auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{4, 16}, {}, &stats);
  check_partition(h, d.vocab);
  REQUIRE(stats.objective_trace.size() > 2);
  CHECK(stats.splits == 15);
  for (std::size_t i = 1; i < stats.objective_trace.size(); ++i) {
    CHECK(stats.objective_trace[i] >= stats.objective_trace[i - 1] - 1e-7);
  }
  double final_obj = class_bigram_loglik(d.events, d.vocab, h.level_map(1));
  CHECK(final_obj == doctest::Approx(stats.objective_trace.back()).epsilon(1e-9));
}

TEST_CASE("induction is deterministic for a seed") {
  auto d = synthetic(4000, 200, 8, 9);
  InductionOptions s1;
  s1.seed = 7;
  auto a = induce_classes(d.events, d.vocab, 10, s1);
  auto b = induce_classes(d.events, d.vocab, 10, s1);
  CHECK(a == b);
  auto c = induce_classes(d.events, d.vocab, 10);
  auto e = induce_classes(d.events, d.vocab, 10);
  CHECK(c == e);
}

TEST_CASE("hierarchies nest") {
  SUBCASE("trivial") {
    auto d = data_of("a b c\n");
    auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{1});
    CHECK(h.levels() == 1);
    CHECK(h.class_count(0) == 1);
  }
  SUBCASE("12-word vocabulary, sizes 2 and 4") {
    std::mt19937_64 rng(2);
    auto v = oracle::numbered_vocab(11);  // 12 predicted words with <unk>
    Data d{v, extract_events(oracle::random_stream(rng, v, 30, 2, 8))};
    auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{2, 4});
    CHECK(h.class_count(0) == 2);
    CHECK(h.class_count(1) == 4);
    check_partition(h, v);
    check_nesting(h);
  }
  SUBCASE("sizes 10 and 100 on a synthetic corpus") {
    auto d = synthetic(60000, 3000, 30, 4);
    auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{10, 100});
    CHECK(h.class_count(0) == 10);
    CHECK(h.class_count(1) == 100);
    check_partition(h, d.vocab);
    for (std::size_t w = 0; w < d.vocab.size(); ++w) {
      auto fine = h.class_of(static_cast<WordId>(w), 1);
      CHECK(h.parent(1, fine) == h.class_of(static_cast<WordId>(w), 0));
    }
  }
}

TEST_CASE("uniform hierarchy is balanced and nested") {
  auto v = oracle::numbered_vocab(9999);
  std::vector<int> sizes{10, 100};
  auto h = uniform_hierarchy(v, sizes);
  for (ClassId c = 0; c < 100; ++c) {
    auto m = h.members(1, c);
    std::size_t outputs = 0;
    for (auto w : m) outputs += v.is_output(w) ? 1 : 0;
    CHECK(outputs == 100);
  }
  for (ClassId c = 0; c < 10; ++c) {
    std::size_t outputs = 0;
    for (auto w : h.members(0, c)) outputs += v.is_output(w) ? 1 : 0;
    CHECK(outputs == 1000);
  }
}

TEST_CASE("class counts are validated") {
  auto d = data_of("a b c\n");
  CHECK_THROWS_AS(induce_classes(d.events, d.vocab, 5), Error);
  CHECK_THROWS_AS(induce_classes(d.events, d.vocab, 0), Error);
  CHECK_THROWS_AS(build_hierarchy(d.events, d.vocab, std::vector<int>{3, 2}), Error);
}

TEST_CASE("class map file round trip and validation") {
  auto d = data_of("a b c d e f a c e b d f\n");
  auto h = build_hierarchy(d.events, d.vocab, std::vector<int>{2, 3});
  std::stringstream buf;
  h.save(buf, d.vocab);
  auto loaded = ClassHierarchy::load(buf, d.vocab);
  CHECK(loaded == h);

  auto line_for = [&](const std::string& word, const std::string& path) {
    return word + "\t" + path + "\n";
  };
  std::string not_nested;
  for (std::size_t w = 0; w < d.vocab.size(); ++w) {
    bool first = w < 4;
    not_nested += line_for(d.vocab.word(static_cast<WordId>(w)),
                           first ? "0/" + std::to_string(w % 2) : "1/" + std::to_string(w % 2));
  }
  std::istringstream bad_nest(not_nested);
  CHECK_THROWS_AS(ClassHierarchy::load(bad_nest, d.vocab), Error);

  std::string sparse;
  for (std::size_t w = 0; w < d.vocab.size(); ++w) {
    sparse += line_for(d.vocab.word(static_cast<WordId>(w)), w == 0 ? "0" : "2");
  }
  std::istringstream bad_dense(sparse);
  CHECK_THROWS_AS(ClassHierarchy::load(bad_dense, d.vocab), Error);
}

TEST_CASE("default level sizes") {
  CHECK(default_level_sizes(10000, 1) == std::vector<int>{100});
  auto three = default_level_sizes(1000000, 2);
  CHECK(three == std::vector<int>{100, 10000});
  CHECK(default_level_sizes(1, 1) == std::vector<int>{1});
}
