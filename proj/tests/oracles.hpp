#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here uses the lookup indexes of the library; every quantity is
// recomputed by direct enumeration.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "classing.hpp"
#include "corpus.hpp"
#include "factored.hpp"
#include "features.hpp"
#include "gis.hpp"

namespace oracle {

// Value of f_key(candidate, history) from the template definition.
bool fires(const cfme::FeatureKey& key, const cfme::History& h, std::int32_t candidate,
           std::span<const std::int32_t> ic);

// The eight (template, args) tuples an event matches, thresholded on
// count-weighted totals. Ordered by key.
std::map<cfme::FeatureKey, std::int64_t> enumerate_features(std::span<const cfme::Event> events,
                                                           std::span<const std::int32_t> ic,
                                                           std::int64_t threshold);

// Candidates of the event's group found by scanning the whole target range.
std::vector<std::int32_t> group_members(const cfme::MaxEntModel& model, std::int32_t target);

// exp(sum_j lambda_j f_j + lambda_slack (C - sum_j f_j)) with f_j evaluated
// for every feature of the model.
double full_sum_score(const cfme::MaxEntModel& model, const cfme::History& h,
                      std::int32_t candidate);

// Double loop over events and candidates with explicit feature values.
std::vector<double> naive_expectations(const cfme::MaxEntModel& model,
                                       std::span<const cfme::Event> events);
double naive_loglike(const cfme::MaxEntModel& model, std::span<const cfme::Event> events);

// Bigram log-likelihood of the word sequence with sentence start as its own
// context: sum N(v,w) ln N(v,w)/N(v,.).
double word_bigram_loglik(std::span<const cfme::Event> events);

// Random small training problem.
struct SmallProblem {
  cfme::Vocabulary vocab;
  std::vector<cfme::Event> events;
  std::vector<std::int32_t> indicator;  // over the vocabulary
};

SmallProblem random_problem(std::mt19937_64& rng, int content_words, int sentences,
                            int indicator_classes);

// Vocabulary w0 .. w{n-1}.
cfme::Vocabulary numbered_vocab(int content_words);

// Sentences of uniformly random content words.
cfme::TokenStream random_stream(std::mt19937_64& rng, const cfme::Vocabulary& vocab,
                                int sentences, int min_len, int max_len);

// Joint table P(w1, w) over predicted words with every word in one class.
struct JointTable {
  cfme::Vocabulary vocab;
  cfme::ClassHierarchy classes;  // one level
  // p[i][j]: probability of (context output i, target output j).
  std::vector<std::vector<double>> p;
};

JointTable random_joint(std::mt19937_64& rng, int content_words, int classes);

// Factored model whose sub-models reproduce the table's class and
// word-within-class conditionals exactly (one bigram feature per context and
// candidate, constant slack).
cfme::FactoredModel factored_from_joint(const JointTable& table);

// P(w | w1) straight from the table.
double joint_conditional(const JointTable& table, std::size_t context, std::size_t target);

}  // namespace oracle
