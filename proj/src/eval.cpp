#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "error.hpp"

namespace cfme {

namespace {

constexpr std::uint64_t kIdBits = 21;
constexpr double kWeightFloor = 1e-6;

std::uint64_t pair_key(WordId v, WordId w) {
  return static_cast<std::uint64_t>(v) << kIdBits | static_cast<std::uint64_t>(w);
}

std::uint64_t triple_key(WordId u, WordId v, WordId w) {
  return static_cast<std::uint64_t>(u) << (2 * kIdBits) | pair_key(v, w);
}

std::int64_t lookup(const std::unordered_map<std::uint64_t, std::int64_t>& map,
                    std::uint64_t key) {
  auto it = map.find(key);
  return it == map.end() ? 0 : it->second;
}

double mixture_loglike(std::span<const double> p_a, std::span<const double> p_b, double alpha) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p_a.size(); ++i) {
    sum += std::log(alpha * p_a[i] + (1.0 - alpha) * p_b[i]);
  }
  return sum;
}

double clamp_weight(double w) { return std::clamp(w, kWeightFloor, 1.0 - kWeightFloor); }

template <typename Fn>
void for_each_position(const TokenStream& stream, Fn&& fn) {
  for (const auto& sentence : stream.sentences) {
    History h;
    for (WordId w : sentence) {
      fn(h, w);
      h.w2 = h.w1;
      h.w1 = w;
    }
  }
}

}  // namespace

TrigramLM::TrigramLM(std::size_t vocab_size, Weights weights)
    : vocab_size_(vocab_size),
      output_count_(vocab_size >= 2 ? vocab_size - 2 : 0),
      weights_(weights),
      unigram_(vocab_size, 0) {
  if (output_count_ == 0) fail(ErrorCode::kInvalidArgument, "vocabulary has no predicted words");
  if (vocab_size >= (std::size_t{1} << kIdBits)) {
    fail(ErrorCode::kInvalidArgument, "vocabulary too large for the trigram tables");
  }
  for (double w : {weights.unigram, weights.bigram, weights.trigram}) {
    if (!(w >= 0.0 && w <= 1.0)) fail(ErrorCode::kInvalidArgument, "weight outside [0,1]");
  }
}

void TrigramLM::add_sentence(std::span<const WordId> sentence) {
  History h;
  for (WordId w : sentence) {
    if (w < Vocabulary::kUnknown || static_cast<std::size_t>(w) >= vocab_size_) {
      fail(ErrorCode::kInvalidArgument, "token id outside the predicted words");
    }
    ++unigram_[static_cast<std::size_t>(w)];
    ++total_;
    ++bigram_[pair_key(h.w1, w)];
    ++bigram_context_[static_cast<std::uint64_t>(h.w1)];
    ++trigram_[triple_key(h.w2, h.w1, w)];
    ++trigram_context_[pair_key(h.w2, h.w1)];
    h.w2 = h.w1;
    h.w1 = w;
  }
}

double TrigramLM::unigram_frequency(WordId w) const {
  if (total_ == 0) return 0.0;
  return static_cast<double>(unigram_[static_cast<std::size_t>(w)]) /
         static_cast<double>(total_);
}

std::pair<double, bool> TrigramLM::bigram_frequency(WordId v, WordId w) const {
  auto ctx = lookup(bigram_context_, static_cast<std::uint64_t>(v));
  if (ctx == 0) return {0.0, false};
  return {static_cast<double>(lookup(bigram_, pair_key(v, w))) / static_cast<double>(ctx), true};
}

std::pair<double, bool> TrigramLM::trigram_frequency(WordId u, WordId v, WordId w) const {
  auto ctx = lookup(trigram_context_, pair_key(u, v));
  if (ctx == 0) return {0.0, false};
  return {static_cast<double>(lookup(trigram_, triple_key(u, v, w))) / static_cast<double>(ctx),
          true};
}

double TrigramLM::probability(const History& h, WordId word) const {
  if (word < Vocabulary::kUnknown || static_cast<std::size_t>(word) >= vocab_size_) return 0.0;
  double p = weights_.unigram * unigram_frequency(word) +
             (1.0 - weights_.unigram) / static_cast<double>(output_count_);
  if (auto [f, seen] = bigram_frequency(h.w1, word); seen) {
    p = weights_.bigram * f + (1.0 - weights_.bigram) * p;
  }
  if (auto [f, seen] = trigram_frequency(h.w2, h.w1, word); seen) {
    p = weights_.trigram * f + (1.0 - weights_.trigram) * p;
  }
  return p;
}

TrigramLM train_trigram(const TokenStream& stream, const Vocabulary& vocab) {
  TokenStream fit, heldout;
  for (std::size_t i = 0; i < stream.sentences.size(); ++i) {
    auto& dest = i % 10 == 9 ? heldout : fit;
    dest.sentences.push_back(stream.sentences[i]);
  }
  if (heldout.token_count() == 0 || fit.token_count() == 0) {
    fail(ErrorCode::kInvalidArgument,
         "trigram training needs at least ten non-empty sentences for the held-out split");
  }

  TrigramLM partial(vocab.size(), {});
  for (const auto& s : fit.sentences) partial.add_sentence(s);
  const double uniform = 1.0 / static_cast<double>(vocab.output_count());

  // Estimate the weights bottom-up; each order mixes its relative frequency
  // with the already fitted lower-order estimate.
  TrigramLM::Weights w;
  std::vector<double> a, b;
  for_each_position(heldout, [&](const History&, WordId t) {
    a.push_back(partial.unigram_frequency(t));
    b.push_back(uniform);
  });
  w.unigram = clamp_weight(fit_alpha_em(a, b).alpha);

  a.clear();
  b.clear();
  for_each_position(heldout, [&](const History& h, WordId t) {
    auto [f, seen] = partial.bigram_frequency(h.w1, t);
    if (!seen) return;
    a.push_back(f);
    b.push_back(w.unigram * partial.unigram_frequency(t) + (1.0 - w.unigram) * uniform);
  });
  if (!a.empty()) w.bigram = clamp_weight(fit_alpha_em(a, b).alpha);

  a.clear();
  b.clear();
  TrigramLM lower(vocab.size(), {w.unigram, w.bigram, 0.0});
  for (const auto& s : fit.sentences) lower.add_sentence(s);
  for_each_position(heldout, [&](const History& h, WordId t) {
    auto [f, seen] = partial.trigram_frequency(h.w2, h.w1, t);
    if (!seen) return;
    a.push_back(f);
    b.push_back(lower.probability(h, t));
  });
  if (!a.empty()) w.trigram = clamp_weight(fit_alpha_em(a, b).alpha);

  TrigramLM model(vocab.size(), w);
  for (const auto& s : stream.sentences) model.add_sentence(s);
  return model;
}

InterpolatedModel::InterpolatedModel(const ConditionalModel& a, const ConditionalModel& b,
                                     double alpha)
    : a_(&a), b_(&b), alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "interpolation weight must lie in [0,1]");
  }
}

double InterpolatedModel::probability(const History& h, WordId word) const {
  if (alpha_ == 1.0) return a_->probability(h, word);
  if (alpha_ == 0.0) return b_->probability(h, word);
  return interpolate(a_->probability(h, word), b_->probability(h, word), alpha_);
}

double interpolate(double p_a, double p_b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "interpolation weight must lie in [0,1]");
  }
  return alpha * p_a + (1.0 - alpha) * p_b;
}

std::string_view alpha_method_name(AlphaMethod method) {
  return method == AlphaMethod::kEm ? "em" : "grid";
}

AlphaFit fit_alpha_grid(std::span<const double> p_a, std::span<const double> p_b) {
  if (p_a.size() != p_b.size() || p_a.empty()) {
    fail(ErrorCode::kInvalidArgument, "alpha fit needs matching non-empty probability lists");
  }
  AlphaFit best{0.0, -std::numeric_limits<double>::infinity(), AlphaMethod::kGrid};
  for (int i = 0; i <= 20; ++i) {
    double alpha = i / 20.0;
    double ll = mixture_loglike(p_a, p_b, alpha);
    if (ll > best.loglike) best = {alpha, ll, AlphaMethod::kGrid};
  }
  if (!std::isfinite(best.loglike)) {
    fail(ErrorCode::kNumeric, "every interpolation weight gives a zero probability");
  }
  return best;
}

AlphaFit fit_alpha_em(std::span<const double> p_a, std::span<const double> p_b) {
  auto grid = fit_alpha_grid(p_a, p_b);
  double alpha = 0.5;
  const double n = static_cast<double>(p_a.size());
  for (int it = 0; it < 5000; ++it) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p_a.size(); ++i) {
      double mix = alpha * p_a[i] + (1.0 - alpha) * p_b[i];
      if (mix > 0.0) sum += alpha * p_a[i] / mix;
    }
    double next = sum / n;
    bool done = std::abs(next - alpha) < 1e-12;
    alpha = next;
    if (done) break;
  }
  AlphaFit em{alpha, mixture_loglike(p_a, p_b, alpha), AlphaMethod::kEm};
  if (!std::isfinite(em.loglike) || em.loglike < grid.loglike) return grid;
  return em;
}

std::vector<double> position_probabilities(const ConditionalModel& model,
                                           const TokenStream& stream) {
  std::vector<double> out;
  out.reserve(stream.token_count());
  for_each_position(stream, [&](const History& h, WordId w) {
    out.push_back(model.probability(h, w));
  });
  return out;
}

std::vector<History> stream_histories(const TokenStream& stream) {
  std::vector<History> out;
  out.reserve(stream.token_count());
  for_each_position(stream, [&](const History& h, WordId) { out.push_back(h); });
  return out;
}

PerplexityResult perplexity(const ConditionalModel& model, const TokenStream& stream,
                            const Vocabulary* vocab, std::ostream* token_log) {
  PerplexityResult result;
  std::size_t sentence_index = 0;
  auto old_precision = token_log ? token_log->precision(17) : 0;
  for (const auto& sentence : stream.sentences) {
    History h;
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const WordId w = sentence[i];
      double p = model.probability(h, w);
      if (!(p > 0.0)) {
        fail(ErrorCode::kNumeric, "zero probability at position " +
                                      std::to_string(result.positions) + " (sentence " +
                                      std::to_string(sentence_index + 1) + ", token " +
                                      std::to_string(i + 1) + ")");
      }
      double lp = std::log(p);
      if (token_log) {
        *token_log << result.positions << '\t';
        if (vocab) {
          *token_log << vocab->word(w);
        } else {
          *token_log << w;
        }
        *token_log << '\t' << lp << '\n';
      }
      result.log_sum += lp;
      ++result.positions;
      h.w2 = h.w1;
      h.w1 = w;
    }
    ++sentence_index;
  }
  if (token_log) token_log->precision(old_precision);
  if (result.positions == 0) fail(ErrorCode::kInvalidArgument, "no word positions to evaluate");
  result.perplexity = std::exp(-result.log_sum / static_cast<double>(result.positions));
  return result;
}

}  // namespace cfme
