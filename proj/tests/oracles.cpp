#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oracle {

using cfme::FeatureKind;
using cfme::FeatureKey;
using cfme::History;

namespace {

struct Slots {
  std::int32_t a1 = -1;
  std::int32_t a2 = -1;
};

Slots slots_for(FeatureKind kind, const History& h, std::span<const std::int32_t> ic) {
  auto c = [&](cfme::WordId w) { return ic[static_cast<std::size_t>(w)]; };
  switch (kind) {
    case FeatureKind::kUnigram:
      return {};
    case FeatureKind::kClassBigram:
      return {c(h.w1), -1};
    case FeatureKind::kClassSkipBigram:
      return {c(h.w2), -1};
    case FeatureKind::kBigram:
      return {h.w1, -1};
    case FeatureKind::kSkipBigram:
      return {h.w2, -1};
    case FeatureKind::kClassTrigram:
      return {c(h.w1), c(h.w2)};
    case FeatureKind::kClassBigramSkipBigram:
      return {c(h.w1), h.w2};
    case FeatureKind::kBigramClassSkipBigram:
      return {h.w1, c(h.w2)};
  }
  return {};
}

constexpr FeatureKind kKinds[] = {
    FeatureKind::kUnigram,         FeatureKind::kClassBigram,
    FeatureKind::kClassSkipBigram, FeatureKind::kBigram,
    FeatureKind::kSkipBigram,      FeatureKind::kClassTrigram,
    FeatureKind::kClassBigramSkipBigram, FeatureKind::kBigramClassSkipBigram};

int feature_total(const cfme::MaxEntModel& model, const History& h, std::int32_t candidate,
                  double* lambda_sum) {
  const auto& fs = model.features();
  const auto lambdas = model.lambdas();
  int n = 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    if (fires(fs.feature(static_cast<cfme::FeatureId>(j)).key, h, candidate,
              fs.indicator_classes())) {
      ++n;
      sum += lambdas[j];
    }
  }
  if (lambda_sum) *lambda_sum = sum;
  return n;
}

}  // namespace

bool fires(const FeatureKey& key, const History& h, std::int32_t candidate,
           std::span<const std::int32_t> ic) {
  if (key.target != candidate) return false;
  Slots s = slots_for(key.kind, h, ic);
  return s.a1 == key.a1 && s.a2 == key.a2;
}

std::map<FeatureKey, std::int64_t> enumerate_features(std::span<const cfme::Event> events,
                                                      std::span<const std::int32_t> ic,
                                                      std::int64_t threshold) {
  std::map<FeatureKey, std::int64_t> counts;
  for (const auto& e : events) {
    for (FeatureKind kind : kKinds) {
      Slots s = slots_for(kind, e.history, ic);
      counts[FeatureKey{kind, e.target, s.a1, s.a2}] += e.count;
    }
  }
  std::erase_if(counts, [&](const auto& kv) { return kv.second < threshold; });
  return counts;
}

std::vector<std::int32_t> group_members(const cfme::MaxEntModel& model, std::int32_t target) {
  const auto& space = model.space();
  std::vector<std::int32_t> out;
  for (std::size_t t = 0; t < space.target_count(); ++t) {
    if (space.group_of(static_cast<std::int32_t>(t)) == space.group_of(target)) {
      out.push_back(static_cast<std::int32_t>(t));
    }
  }
  return out;
}

double full_sum_score(const cfme::MaxEntModel& model, const History& h, std::int32_t candidate) {
  double lambda_sum = 0.0;
  int n = feature_total(model, h, candidate, &lambda_sum);
  double slack = model.lambdas()[static_cast<std::size_t>(model.slack_id())];
  return std::exp(lambda_sum + slack * (model.slack_constant() - n));
}

std::vector<double> naive_expectations(const cfme::MaxEntModel& model,
                                       std::span<const cfme::Event> events) {
  const auto& fs = model.features();
  std::vector<double> expected(fs.size() + 1, 0.0);
  for (const auto& e : events) {
    auto cands = group_members(model, e.target);
    std::vector<double> score(cands.size());
    double z = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      score[i] = full_sum_score(model, e.history, cands[i]);
      z += score[i];
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
      double p = static_cast<double>(e.count) * score[i] / z;
      int n = 0;
      for (std::size_t j = 0; j < fs.size(); ++j) {
        if (fires(fs.feature(static_cast<cfme::FeatureId>(j)).key, e.history, cands[i],
                  fs.indicator_classes())) {
          expected[j] += p;
          ++n;
        }
      }
      expected.back() += p * (model.slack_constant() - n);
    }
  }
  return expected;
}

double naive_loglike(const cfme::MaxEntModel& model, std::span<const cfme::Event> events) {
  double ll = 0.0;
  for (const auto& e : events) {
    double z = 0.0;
    for (auto t : group_members(model, e.target)) z += full_sum_score(model, e.history, t);
    ll += static_cast<double>(e.count) * std::log(full_sum_score(model, e.history, e.target) / z);
  }
  return ll;
}

double word_bigram_loglik(std::span<const cfme::Event> events) {
  std::map<std::pair<cfme::WordId, cfme::WordId>, double> pair;
  std::map<cfme::WordId, double> ctx;
  for (const auto& e : events) {
    pair[{e.history.w1, e.target}] += static_cast<double>(e.count);
    ctx[e.history.w1] += static_cast<double>(e.count);
  }
  double ll = 0.0;
  for (const auto& [k, n] : pair) ll += n * std::log(n / ctx[k.first]);
  return ll;
}

cfme::Vocabulary numbered_vocab(int content_words) {
  std::vector<std::string> words;
  for (int i = 0; i < content_words; ++i) words.push_back("w" + std::to_string(i));
  return cfme::Vocabulary::from_words(words);
}

cfme::TokenStream random_stream(std::mt19937_64& rng, const cfme::Vocabulary& vocab,
                                int sentences, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<cfme::WordId> word(
      static_cast<cfme::WordId>(cfme::Vocabulary::kReservedCount),
      static_cast<cfme::WordId>(vocab.size() - 1));
  cfme::TokenStream stream;
  for (int s = 0; s < sentences; ++s) {
    std::vector<cfme::WordId> sentence(static_cast<std::size_t>(len(rng)));
    for (auto& w : sentence) w = word(rng);
    stream.sentences.push_back(std::move(sentence));
  }
  return stream;
}

SmallProblem random_problem(std::mt19937_64& rng, int content_words, int sentences,
                            int indicator_classes) {
  SmallProblem p;
  p.vocab = numbered_vocab(content_words);
  // A skewed first-order chain so that some features pass the threshold.
  std::vector<std::vector<double>> next(p.vocab.size(), std::vector<double>(p.vocab.size(), 0.0));
  std::gamma_distribution<double> gamma(0.3, 1.0);
  for (std::size_t v = 0; v < p.vocab.size(); ++v) {
    for (std::size_t w = cfme::Vocabulary::kReservedCount; w < p.vocab.size(); ++w) {
      next[v][w] = gamma(rng) + 1e-3;
    }
  }
  std::uniform_int_distribution<int> len(1, 6);
  cfme::TokenStream stream;
  for (int s = 0; s < sentences; ++s) {
    std::vector<cfme::WordId> sentence;
    cfme::WordId prev = cfme::Vocabulary::kSentenceStart;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
      std::discrete_distribution<int> d(next[static_cast<std::size_t>(prev)].begin(),
                                        next[static_cast<std::size_t>(prev)].end());
      prev = d(rng);
      sentence.push_back(prev);
    }
    stream.sentences.push_back(std::move(sentence));
  }
  p.events = cfme::extract_events(stream);
  std::uniform_int_distribution<std::int32_t> cls(0, indicator_classes - 1);
  p.indicator.resize(p.vocab.size());
  for (auto& c : p.indicator) c = cls(rng);
  return p;
}

JointTable random_joint(std::mt19937_64& rng, int content_words, int classes) {
  JointTable t;
  t.vocab = numbered_vocab(content_words);
  const std::size_t outputs = t.vocab.output_count();
  std::vector<std::size_t> order(outputs);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<cfme::ClassId> class_of(t.vocab.size(), 0);
  for (std::size_t i = 0; i < outputs; ++i) {
    class_of[order[i] + static_cast<std::size_t>(t.vocab.first_output())] =
        static_cast<cfme::ClassId>(i % static_cast<std::size_t>(classes));
  }
  t.classes = cfme::ClassHierarchy({class_of});
  std::uniform_real_distribution<double> u(0.01, 1.0);
  double total = 0.0;
  t.p.assign(outputs, std::vector<double>(outputs));
  for (auto& row : t.p) {
    for (auto& x : row) {
      x = u(rng) * u(rng);
      total += x;
    }
  }
  for (auto& row : t.p) {
    for (auto& x : row) x /= total;
  }
  return t;
}

double joint_conditional(const JointTable& table, std::size_t context, std::size_t target) {
  double row = 0.0;
  for (double x : table.p[context]) row += x;
  return table.p[context][target] / row;
}

cfme::FactoredModel factored_from_joint(const JointTable& table) {
  const auto& vocab = table.vocab;
  const auto first = static_cast<std::size_t>(vocab.first_output());
  const std::size_t outputs = vocab.output_count();
  std::vector<std::int32_t> ic(vocab.size(), 0);

  auto build = [&](std::size_t level, auto log_prob) {
    std::vector<cfme::Feature> features;
    std::vector<double> lambdas;
    auto space = cfme::level_space(vocab, &table.classes, level);
    for (std::size_t i = 0; i < outputs; ++i) {
      for (std::size_t t = 0; t < space.target_count(); ++t) {
        if (space.group_of(static_cast<std::int32_t>(t)) < 0) continue;
        features.push_back(cfme::Feature{
            FeatureKey{FeatureKind::kBigram, static_cast<std::int32_t>(t),
                       static_cast<std::int32_t>(i + first), -1},
            1});
      }
    }
    cfme::FeatureSet set(features, ic);
    cfme::MaxEntModel model(set, std::move(space), 1);
    auto l = model.mutable_lambdas();
    for (std::size_t j = 0; j < set.size(); ++j) {
      const auto& key = set.feature(static_cast<cfme::FeatureId>(j)).key;
      l[j] = log_prob(static_cast<std::size_t>(key.a1) - first, key.target);
    }
    return model;
  };

  auto class_mass = [&](std::size_t ctx, cfme::ClassId c) {
    double m = 0.0;
    for (std::size_t w = 0; w < outputs; ++w) {
      if (table.classes.class_of(static_cast<cfme::WordId>(w + first), 0) == c) {
        m += table.p[ctx][w];
      }
    }
    return m;
  };
  auto row_mass = [&](std::size_t ctx) {
    double m = 0.0;
    for (double x : table.p[ctx]) m += x;
    return m;
  };

  std::vector<cfme::MaxEntModel> levels;
  levels.push_back(build(0, [&](std::size_t ctx, std::int32_t c) {
    return std::log(class_mass(ctx, c) / row_mass(ctx));
  }));
  levels.push_back(build(1, [&](std::size_t ctx, std::int32_t w) {
    auto c = table.classes.class_of(w, 0);
    return std::log(table.p[ctx][static_cast<std::size_t>(w) - first] / class_mass(ctx, c));
  }));
  return cfme::FactoredModel(table.classes, std::move(levels), vocab.size());
}

}  // namespace oracle
