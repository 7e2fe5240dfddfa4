#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "corpus.hpp"

namespace cfme {

using ClassId = std::int32_t;

// Per-word path of class ids over one or more levels. Level 0 is the
// coarsest; each class at level k+1 lies entirely inside one class at level k.
// Every vocabulary id, reserved ones included, has a complete path.
class ClassHierarchy {
 public:
  static constexpr std::size_t kMaxLevels = 3;

  ClassHierarchy() = default;
  // class_of[level][word]. Throws if classes are not dense, some class is
  // empty, or levels do not nest.
  explicit ClassHierarchy(std::vector<std::vector<ClassId>> class_of);

  std::size_t levels() const { return class_of_.size(); }
  std::size_t vocab_size() const {
    return class_of_.empty() ? 0 : class_of_.front().size();
  }
  std::size_t class_count(std::size_t level) const { return counts_.at(level); }
  ClassId class_of(WordId word, std::size_t level) const {
    return class_of_[level][static_cast<std::size_t>(word)];
  }
  const std::vector<ClassId>& level_map(std::size_t level) const {
    return class_of_.at(level);
  }
  // Coarser class containing `cls`; level must be >= 1.
  ClassId parent(std::size_t level, ClassId cls) const {
    return parents_.at(level - 1)[static_cast<std::size_t>(cls)];
  }
  // Every vocabulary id in the class, ascending.
  std::vector<WordId> members(std::size_t level, ClassId cls) const;

  void save(std::ostream& out, const Vocabulary& vocab) const;
  void save(const std::filesystem::path& path, const Vocabulary& vocab) const;
  static ClassHierarchy load(std::istream& in, const Vocabulary& vocab);
  static ClassHierarchy load(const std::filesystem::path& path,
                             const Vocabulary& vocab);

  friend bool operator==(const ClassHierarchy& a, const ClassHierarchy& b) {
    return a.class_of_ == b.class_of_;
  }

 private:
  std::vector<std::vector<ClassId>> class_of_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<ClassId>> parents_;
};

// Objective trace of one induction run: the class-bigram log-likelihood after
// each split initialisation and after every accepted exchange move.
struct InductionStats {
  std::vector<double> objective_trace;
  std::size_t splits = 0;
  std::size_t moves = 0;
};

struct InductionOptions {
  std::uint64_t seed = 0;
  int max_passes = 20;
  // Random restarts of each split whose class has at most restart_limit words.
  int restarts = 4;
  std::size_t restart_limit = 64;
};

// Top-down binary splitting over the predicted words: the class with the
// largest within-class emission entropy is split next, starting from an
// alternating assignment in frequency order and refined by exchange passes
// that move one word at a time whenever the class-bigram log-likelihood of
// the training events improves. Boundary tokens join class 0.
ClassHierarchy induce_classes(std::span<const Event> events,
                              const Vocabulary& vocab, int num_classes,
                              const InductionOptions& options = {},
                              InductionStats* stats = nullptr);

// Same procedure continued through increasing class counts; a snapshot is
// taken at each requested size, so the levels nest by construction.
ClassHierarchy build_hierarchy(std::span<const Event> events,
                               const Vocabulary& vocab,
                               std::span<const int> level_sizes,
                               const InductionOptions& options = {},
                               InductionStats* stats = nullptr);

// Balanced contiguous blocks of predicted words; used for cost-model checks.
ClassHierarchy uniform_hierarchy(const Vocabulary& vocab,
                                 std::span<const int> level_sizes);

// sum_{c1,c2} N(c1,c2) ln N(c1,c2)/N(c1,.) + sum_w N(w) ln N(w)/N(class(w)),
// with sentence start as its own context class. Computed from scratch.
double class_bigram_loglik(std::span<const Event> events,
                           const Vocabulary& vocab,
                           std::span<const ClassId> class_of);

// Default class counts: sqrt(|outputs|) for one level; cube-root spacing for two.
std::vector<int> default_level_sizes(std::size_t output_count, int class_levels);

}  // namespace cfme
