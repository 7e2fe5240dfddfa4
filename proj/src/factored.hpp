#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "classing.hpp"
#include "corpus.hpp"
#include "gis.hpp"

namespace cfme {

// Training methods: flat GIS over all words (optionally with the unigram
// cache) and the class-factored models with one or two class levels.
enum class Method { kGis, kGisCache, kFactored2, kFactored3 };

std::string_view method_name(Method method);
std::optional<Method> method_from_name(std::string_view name);
// Number of class levels above the word level (0 for the flat methods).
int class_levels(Method method);
bool uses_unigram_cache(Method method);

// Candidate space of sub-model `level` (0 .. hierarchy levels). Class levels
// group classes by parent; the last level predicts words grouped by their
// finest class. Without a hierarchy the only level covers every predicted word.
CandidateSpace level_space(const Vocabulary& vocab, const ClassHierarchy* hierarchy,
                           std::size_t level);

// One event set per sub-model: level k < L has the target's level-k class as
// target, the last level keeps the word. Counts are preserved and merged.
std::vector<std::vector<Event>> factor_events(std::span<const Event> events,
                                              const Vocabulary& vocab,
                                              const ClassHierarchy* hierarchy);

// Product of per-level conditionals along each word's class path.
class FactoredModel {
 public:
  FactoredModel() = default;
  FactoredModel(std::optional<ClassHierarchy> hierarchy, std::vector<MaxEntModel> levels,
                std::size_t vocab_size);

  const ClassHierarchy* hierarchy() const { return hierarchy_ ? &*hierarchy_ : nullptr; }
  std::size_t level_count() const { return levels_.size(); }
  const MaxEntModel& level(std::size_t k) const { return levels_.at(k); }
  MaxEntModel& level(std::size_t k) { return levels_.at(k); }
  std::size_t vocab_size() const { return vocab_size_; }

  // 0 for the boundary tokens, which are never predicted.
  double probability(const History& h, WordId word) const;
  // P(w | h) for every vocabulary id.
  std::vector<double> distribution(const History& h) const;

 private:
  std::optional<ClassHierarchy> hierarchy_;
  std::vector<MaxEntModel> levels_;
  std::size_t vocab_size_ = 0;
};

// Untrained sub-models together with the events each one is fitted to.
struct FactoredProblem {
  FactoredModel model;
  std::vector<std::vector<Event>> level_events;
};

FactoredProblem prepare_factored(std::span<const Event> events, const Vocabulary& vocab,
                                 std::optional<ClassHierarchy> hierarchy,
                                 std::span<const std::int32_t> indicator_classes,
                                 std::int64_t min_count);

struct FactoredTrainLog {
  std::vector<TrainLog> levels;

  // Candidate evaluations per distinct event in the first iteration, summed
  // over levels.
  double ops_per_event() const;
  // Sum over levels of the mean wallclock of one iteration.
  double seconds_per_iteration() const;
  bool converged() const;
};

// Each level is trained independently with the same GIS settings.
FactoredTrainLog train_factored(FactoredProblem& problem, const GisOptions& options);

// Model directory: manifest.txt, vocab.txt, indicator.map, hierarchy.map (class
// methods only) and one levelK.model per sub-model.
struct ModelBundle {
  Method method = Method::kGis;
  Vocabulary vocab;
  ClassHierarchy indicator;  // one level
  FactoredModel model;
};

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& dir);

// Single-level indicator map from the training events, clamped to the number
// of predicted words.
ClassHierarchy induce_indicator_map(std::span<const Event> events, const Vocabulary& vocab,
                                    int num_classes, std::uint64_t seed);

}  // namespace cfme
