#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "features.hpp"

namespace cfme {

// The set of values a model normalises over. Candidates are partitioned into
// groups; an event's candidates are the group holding its target. A single
// group covers the whole space (all words, or all top-level classes).
class CandidateSpace {
 public:
  CandidateSpace() = default;
  // group_of[t] is t's group, or -1 when t is never a candidate.
  CandidateSpace(std::string descriptor, std::vector<std::int32_t> group_of);
  static CandidateSpace single(std::string descriptor, std::size_t target_count,
                               std::span<const std::int32_t> candidates);

  const std::string& descriptor() const { return descriptor_; }
  std::size_t target_count() const { return group_of_.size(); }
  std::size_t group_count() const { return groups_.size(); }
  std::int32_t group_of(std::int32_t target) const;
  const std::vector<std::int32_t>& group(std::int32_t g) const {
    return groups_[static_cast<std::size_t>(g)];
  }

 private:
  std::string descriptor_;
  std::vector<std::int32_t> group_of_;
  std::vector<std::vector<std::int32_t>> groups_;
};

// Conditional log-linear model over a candidate space. Lambdas are indexed by
// feature id with the slack feature last; the slack value for a
// (history, candidate) pair is C minus the number of firing features.
class MaxEntModel {
 public:
  MaxEntModel() = default;
  MaxEntModel(FeatureSet features, CandidateSpace space, int slack_constant);

  const FeatureSet& features() const { return features_; }
  const CandidateSpace& space() const { return space_; }
  int slack_constant() const { return slack_constant_; }
  FeatureId slack_id() const { return static_cast<FeatureId>(features_.size()); }
  std::span<const double> lambdas() const { return lambdas_; }
  std::span<double> mutable_lambdas() { return lambdas_; }
  int iterations() const { return iterations_; }
  void add_iterations(int n) { iterations_ += n; }

  // Internal lookup used by the inner loops: firing non-unigram features for
  // a history, restricted to one group.
  struct Firing {
    std::int32_t target;
    FeatureId feature;
  };
  struct FiringLists {
    std::array<std::span<const Firing>, kFeatureKindCount - 1> lists;
    std::array<std::uint32_t, kFeatureKindCount - 1> offsets{};  // positions in pool()
  };
  FiringLists firing(const History& h, std::int32_t group) const;
  // Every list back to back; each candidate feature appears exactly once.
  std::span<const Firing> pool() const { return pool_; }
  FeatureId unigram_feature(std::int32_t target) const {
    return unigram_[static_cast<std::size_t>(target)];
  }
  // Candidates renumbered group by group so each group is a contiguous slot
  // range [group_begin(g), group_begin(g + 1)), in group order.
  std::size_t slot_count() const { return slot_unigram_.size(); }
  std::int32_t group_begin(std::int32_t g) const {
    return group_begin_[static_cast<std::size_t>(g)];
  }
  std::int32_t slot_of(std::int32_t target) const {
    return slot_of_[static_cast<std::size_t>(target)];
  }
  FeatureId slot_unigram(std::int32_t slot) const {
    return slot_unigram_[static_cast<std::size_t>(slot)];
  }

 private:
  struct ListKey {
    std::uint8_t kind;
    std::int32_t a1, a2, group;
    bool operator==(const ListKey&) const = default;
  };
  struct ListKeyHash {
    std::size_t operator()(const ListKey& k) const noexcept;
  };
  struct Range {
    std::uint32_t offset, length;
  };

  void build_index();

  FeatureSet features_;
  CandidateSpace space_;
  int slack_constant_ = 1;
  std::vector<double> lambdas_;
  int iterations_ = 0;
  std::vector<FeatureId> unigram_;
  std::vector<std::int32_t> group_begin_;
  std::vector<std::int32_t> slot_of_;
  std::vector<FeatureId> slot_unigram_;
  std::vector<Firing> pool_;
  std::unordered_map<ListKey, Range, ListKeyHash> lists_;
};

// max(1, max over events and over every candidate of the event's group of the
// number of firing features).
int compute_slack_constant(const FeatureSet& features, const CandidateSpace& space,
                           std::span<const Event> events);
MaxEntModel make_model(FeatureSet features, CandidateSpace space,
                       std::span<const Event> events);

int firing_count(const MaxEntModel& model, const History& h, std::int32_t candidate);
// exp(sum of firing lambdas + slack lambda * slack value). Throws kNumeric
// above 1e300.
double unnormalized_score(const MaxEntModel& model, const History& h,
                          std::int32_t candidate);
double normalizer(const MaxEntModel& model, const History& h, std::int32_t group);
double probability(const MaxEntModel& model, const History& h, std::int32_t target);
// P(t | h) for every t in the group, in group order.
std::vector<double> group_distribution(const MaxEntModel& model, const History& h,
                                       std::int32_t group);

struct TrainerState {
  std::vector<double> empirical;
  std::vector<double> expected;
  int iteration = 0;
  double train_loglike = 0.0;
  std::int64_t op_counter = 0;
};

struct PassOptions {
  bool unigram_cache = false;
  int threads = 1;
};

struct ExpectationResult {
  std::vector<double> expected;  // includes slack, last
  double loglike = 0.0;
  std::int64_t op_count = 0;
};

// Model expectations of every feature over the training events, the training
// log-likelihood of the current lambdas, and the number of candidate
// evaluations performed.
ExpectationResult expectation_pass(const MaxEntModel& model, std::span<const Event> events,
                                   const PassOptions& options = {});

// Count-weighted feature totals on the training targets (slack last).
std::vector<double> empirical_counts(const MaxEntModel& model, std::span<const Event> events);

// lambda_j += ln(empirical_j / expected_j) / C. Features with zero empirical
// mass (only the slack can have none) keep their value.
void update_lambdas(MaxEntModel& model, std::span<const double> empirical,
                    std::span<const double> expected);

double max_relative_deviation(std::span<const double> empirical,
                              std::span<const double> expected);

struct GisOptions {
  int iterations = 100;
  double tolerance = 1e-4;
  bool unigram_cache = false;
  int threads = 1;
};

struct IterationRecord {
  int iteration = 0;
  double loglike = 0.0;
  std::int64_t op_count = 0;
  double max_deviation = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<IterationRecord> iterations;
  bool converged = false;
  std::int64_t event_count = 0;  // distinct (merged) events
  TrainerState final_state;
};

TrainLog train(MaxEntModel& model, std::span<const Event> events, const GisOptions& options);
// Same trajectory as train() with the unigram contributions cached per iteration.
TrainLog train_unigram_cached(MaxEntModel& model, std::span<const Event> events,
                              GisOptions options);

// Text model file; see save_model for the layout.
void save_model(std::ostream& out, const MaxEntModel& model);
struct ModelFile {
  std::string candidate_space;
  int slack_constant = 1;
  int iterations = 0;
  std::vector<FeatureKey> keys;
  std::vector<double> lambdas;  // slack last
};
ModelFile read_model_file(std::istream& in);
MaxEntModel model_from_file(const ModelFile& file, CandidateSpace space,
                            std::vector<std::int32_t> indicator_classes);

}  // namespace cfme
