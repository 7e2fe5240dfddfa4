#include <doctest.h>

#include <random>
#include <sstream>

#include "error.hpp"
#include "features.hpp"
#include "oracles.hpp"

using namespace cfme;

namespace {

std::vector<Event> events_of(const std::string& text, Vocabulary& v) {
  std::istringstream in(text);
  v = build_vocabulary(in, 1000);
  in.clear();
  in.seekg(0);
  return extract_events(tokenize(in, v));
}

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto kind : kAllFeatureKinds) {
    CHECK(kind_from_name(kind_name(kind)) == kind);
  }
  CHECK_FALSE(kind_from_name("trigram").has_value());
  CHECK(history_arity(FeatureKind::kUnigram) == 0);
  CHECK(history_arity(FeatureKind::kSkipBigram) == 1);
  CHECK(history_arity(FeatureKind::kBigramClassSkipBigram) == 2);
}

TEST_CASE("threshold keeps tuples seen at least that often") {
  Vocabulary v;
  auto events = events_of("a b\na b\na b\nc b\nc b\n", v);
  std::vector<std::int32_t> ic(v.size(), 0);
  const auto a = v.id("a"), b = v.id("b"), c = v.id("c");
  auto three = instantiate(events, ic, 3);
  CHECK(three.find({FeatureKind::kBigram, b, a, -1}).has_value());
  CHECK_FALSE(three.find({FeatureKind::kBigram, b, c, -1}).has_value());
  auto two = instantiate(events, ic, 2);
  auto id = two.find({FeatureKind::kBigram, b, c, -1});
  REQUIRE(id.has_value());
  CHECK(two.feature(*id).train_count == 2);
  auto uni = two.find({FeatureKind::kUnigram, b, -1, -1});
  REQUIRE(uni.has_value());
  CHECK(two.feature(*uni).train_count == 5);
  CHECK_THROWS_AS(instantiate(events, ic, 0), Error);
}

TEST_CASE("inventory matches direct enumeration") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = oracle::random_problem(rng, 15, 120, 4);
    for (std::int64_t threshold : {1, 2, 3, 5}) {
      auto set = instantiate(p.events, p.indicator, threshold);
      auto expect = oracle::enumerate_features(p.events, p.indicator, threshold);
      REQUIRE(set.size() == expect.size());
      std::size_t i = 0;
      for (const auto& [key, count] : expect) {
        const auto& f = set.feature(static_cast<FeatureId>(i++));
        CHECK(f.key == key);
        CHECK(f.train_count == count);
      }
    }
  }
}

TEST_CASE("active features match the template definitions") {
  std::mt19937_64 rng(8);
  auto p = oracle::random_problem(rng, 10, 200, 3);
  auto set = instantiate(p.events, p.indicator, 2);
  const auto n = static_cast<WordId>(p.vocab.size());
  for (WordId w2 = 0; w2 < n; ++w2) {
    for (WordId w1 = 0; w1 < n; ++w1) {
      History h{w2, w1};
      for (WordId cand = 0; cand < n; ++cand) {
        std::vector<FeatureId> expect;
        for (std::size_t j = 0; j < set.size(); ++j) {
          if (oracle::fires(set.feature(static_cast<FeatureId>(j)).key, h, cand, p.indicator)) {
            expect.push_back(static_cast<FeatureId>(j));
          }
        }
        auto got = set.active_features(h, cand);
        std::sort(got.begin(), got.end());
        CHECK(got == expect);
        CHECK(got.size() <= kFeatureKindCount);
      }
    }
  }
}

TEST_CASE("meet on tuesday") {
  Vocabulary v;
  auto events = events_of("meet on tuesday\n", v);
  const auto meet = v.id("meet"), on = v.id("on"), tuesday = v.id("tuesday");
  std::vector<std::int32_t> ic(v.size(), 0);
  ic[static_cast<std::size_t>(on)] = 1;
  auto set = instantiate(events, ic, 1);
  History h{meet, on};
  auto active = set.active_features(h, tuesday);
  CHECK(active.size() == kFeatureKindCount);
  auto has = [&](FeatureKey key) {
    auto id = set.find(key);
    return id && std::find(active.begin(), active.end(), *id) != active.end();
  };
  CHECK(has({FeatureKind::kBigram, tuesday, on, -1}));
  CHECK(has({FeatureKind::kSkipBigram, tuesday, meet, -1}));
  CHECK(has({FeatureKind::kClassBigramSkipBigram, tuesday, 1, meet}));
  CHECK(has({FeatureKind::kClassTrigram, tuesday, 1, 0}));
  // Another history that shares only w-2 fires the skip bigram but not the bigram.
  auto other = set.active_features(History{meet, tuesday}, tuesday);
  CHECK(std::find(other.begin(), other.end(),
                  *set.find({FeatureKind::kSkipBigram, tuesday, meet, -1})) != other.end());
  CHECK(std::find(other.begin(), other.end(),
                  *set.find({FeatureKind::kBigram, tuesday, on, -1})) == other.end());
}

TEST_CASE("at most eight features fire per event") {
  std::mt19937_64 rng(5);
  auto p = oracle::random_problem(rng, 20, 300, 5);
  auto set = instantiate(p.events, p.indicator, 1);
  for (const auto& e : p.events) {
    auto active = set.active_features(e.history, e.target);
    // Threshold 1 keeps every tuple matched by a training event.
    CHECK(active.size() == kFeatureKindCount);
    std::vector<bool> kind_seen(kFeatureKindCount, false);
    for (auto id : active) {
      auto k = static_cast<std::size_t>(set.feature(id).key.kind);
      CHECK_FALSE(kind_seen[k]);
      kind_seen[k] = true;
    }
  }
}

TEST_CASE("dump format") {
  Vocabulary v;
  auto events = events_of("a b\n", v);
  std::vector<std::int32_t> ic(v.size(), 0);
  auto set = instantiate(events, ic, 1);
  std::ostringstream out;
  set.dump(out);
  std::istringstream lines(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string id, kind;
    fields >> id >> kind;
    CHECK(id == std::to_string(n));
    auto k = kind_from_name(kind);
    REQUIRE(k.has_value());
    std::size_t count = 0;
    std::string field;
    while (fields >> field) ++count;
    CHECK(count == static_cast<std::size_t>(2 + history_arity(*k)));
    ++n;
  }
  CHECK(n == set.size());
}

TEST_CASE("restricted candidates cover exactly the class") {
  std::vector<std::int32_t> members{4, 7, 9};
  auto c = restrict_to_class(members);
  CHECK(c.size() == 3);
  CHECK(std::vector<std::int32_t>(c.begin(), c.end()) == members);
  CHECK_THROWS_AS(restrict_to_class({}), Error);
}

TEST_CASE("indicator map must cover the history") {
  std::vector<std::int32_t> ic{0, 0};
  CHECK_THROWS_AS(history_args(FeatureKind::kClassBigram, History{0, 5}, ic), Error);
}
