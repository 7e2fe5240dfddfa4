#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "factored.hpp"

namespace cfme {

// Anything that assigns P(w | h) to predicted words.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;
  virtual double probability(const History& h, WordId word) const = 0;
};

class FactoredConditional : public ConditionalModel {
 public:
  explicit FactoredConditional(const FactoredModel& model) : model_(&model) {}
  double probability(const History& h, WordId word) const override {
    return model_->probability(h, word);
  }

 private:
  const FactoredModel* model_;
};

// Deleted-interpolation trigram model over the predicted words:
//   P1(w)     = m1 f(w) + (1 - m1) / |outputs|
//   P2(w|v)   = m2 f(w|v) + (1 - m2) P1(w)      when v was seen as a context
//   P3(w|u,v) = m3 f(w|u,v) + (1 - m3) P2(w|v)  when (u,v) was seen
// Unseen contexts back off to the next lower order unchanged.
class TrigramLM : public ConditionalModel {
 public:
  struct Weights {
    double unigram = 0.5;
    double bigram = 0.5;
    double trigram = 0.5;
  };

  TrigramLM() = default;
  TrigramLM(std::size_t vocab_size, Weights weights);

  void add_sentence(std::span<const WordId> sentence);
  double probability(const History& h, WordId word) const override;

  const Weights& weights() const { return weights_; }
  std::size_t vocab_size() const { return vocab_size_; }

  // Components used by the weight estimation.
  double unigram_frequency(WordId w) const;
  // Relative frequency and whether the context was seen.
  std::pair<double, bool> bigram_frequency(WordId v, WordId w) const;
  std::pair<double, bool> trigram_frequency(WordId u, WordId v, WordId w) const;

 private:
  std::size_t vocab_size_ = 0;
  std::size_t output_count_ = 0;
  Weights weights_;
  std::vector<std::int64_t> unigram_;
  std::int64_t total_ = 0;
  std::unordered_map<std::uint64_t, std::int64_t> bigram_, bigram_context_;
  std::unordered_map<std::uint64_t, std::int64_t> trigram_, trigram_context_;
};

// Counts from all sentences; weights fitted by EM, one order at a time, on
// every tenth sentence held out from counts of the rest. Throws if the
// corpus has fewer than ten sentences.
TrigramLM train_trigram(const TokenStream& stream, const Vocabulary& vocab);

// a * P_a + (1 - a) * P_b.
class InterpolatedModel : public ConditionalModel {
 public:
  InterpolatedModel(const ConditionalModel& a, const ConditionalModel& b, double alpha);
  double probability(const History& h, WordId word) const override;
  double alpha() const { return alpha_; }

 private:
  const ConditionalModel* a_;
  const ConditionalModel* b_;
  double alpha_;
};

double interpolate(double p_a, double p_b, double alpha);

enum class AlphaMethod { kEm, kGrid };
std::string_view alpha_method_name(AlphaMethod method);

struct AlphaFit {
  double alpha = 1.0;
  double loglike = 0.0;
  AlphaMethod method = AlphaMethod::kEm;
};

// Mixture weight of `a` maximising sum ln(alpha a_i + (1 - alpha) b_i). EM from
// 0.5; the best point of the 0.05 grid replaces it if EM ends up worse.
AlphaFit fit_alpha_em(std::span<const double> p_a, std::span<const double> p_b);
AlphaFit fit_alpha_grid(std::span<const double> p_a, std::span<const double> p_b);

// Per-position probabilities of every word in the stream, in order.
std::vector<double> position_probabilities(const ConditionalModel& model,
                                           const TokenStream& stream);

struct PerplexityResult {
  double perplexity = 0.0;
  double log_sum = 0.0;  // sum of ln P
  std::int64_t positions = 0;
};

// exp(-mean ln P) over every word position. Throws kNumeric naming the
// position on a zero probability. With `token_log`, writes
// `position<TAB>word<TAB>logprob` per position.
PerplexityResult perplexity(const ConditionalModel& model, const TokenStream& stream,
                            const Vocabulary* vocab = nullptr,
                            std::ostream* token_log = nullptr);

// Histories of a stream in position order.
std::vector<History> stream_histories(const TokenStream& stream);

}  // namespace cfme
