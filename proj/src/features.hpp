#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"

namespace cfme {

using FeatureId = std::int32_t;

// The eight indicator templates. W is always the predicted value; the other
// slots bind the previous words or their indicator classes:
//   unigram                    W
//   class-bigram               W, class(w-1)
//   class-skip-bigram          W, class(w-2)
//   bigram                     W, w-1
//   skip-bigram                W, w-2
//   class-trigram              W, class(w-1), class(w-2)
//   class-bigram-skip-bigram   W, class(w-1), w-2
//   bigram-class-skip-bigram   W, w-1, class(w-2)
enum class FeatureKind : std::uint8_t {
  kUnigram = 0,
  kClassBigram,
  kClassSkipBigram,
  kBigram,
  kSkipBigram,
  kClassTrigram,
  kClassBigramSkipBigram,
  kBigramClassSkipBigram,
};

inline constexpr std::size_t kFeatureKindCount = 8;
inline constexpr std::array<FeatureKind, kFeatureKindCount> kAllFeatureKinds = {
    FeatureKind::kUnigram,         FeatureKind::kClassBigram,
    FeatureKind::kClassSkipBigram, FeatureKind::kBigram,
    FeatureKind::kSkipBigram,      FeatureKind::kClassTrigram,
    FeatureKind::kClassBigramSkipBigram, FeatureKind::kBigramClassSkipBigram};

std::string_view kind_name(FeatureKind kind);
std::optional<FeatureKind> kind_from_name(std::string_view name);
// Number of history slots the kind binds (0, 1 or 2).
int history_arity(FeatureKind kind);

// (template, W, history slots). Unused slots hold -1.
struct FeatureKey {
  FeatureKind kind = FeatureKind::kUnigram;
  std::int32_t target = 0;
  std::int32_t a1 = -1;
  std::int32_t a2 = -1;

  auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureKeyHash {
  std::size_t operator()(const FeatureKey& k) const noexcept;
};

// History slot values a kind binds for a given history.
struct HistoryArgs {
  std::int32_t a1 = -1;
  std::int32_t a2 = -1;
};
HistoryArgs history_args(FeatureKind kind, const History& h,
                         std::span<const std::int32_t> indicator_classes);

struct Feature {
  FeatureKey key;
  std::int64_t train_count = 0;
};

// Instantiated indicator functions plus the word -> indicator-class map used
// by the class-conditioned templates. Immutable once built.
class FeatureSet {
 public:
  FeatureSet() = default;
  // Features are sorted by key and given dense ids in that order.
  FeatureSet(std::vector<Feature> features, std::vector<std::int32_t> indicator_classes);

  std::size_t size() const { return features_.size(); }
  const Feature& feature(FeatureId id) const {
    return features_[static_cast<std::size_t>(id)];
  }
  const std::vector<Feature>& features() const { return features_; }
  const std::vector<std::int32_t>& indicator_classes() const { return indicator_classes_; }

  std::optional<FeatureId> find(const FeatureKey& key) const;

  // Every feature that fires for (history, candidate); at most one per kind.
  std::vector<FeatureId> active_features(const History& h, std::int32_t candidate) const;
  // Allocation-free variant; returns the number written to `out`.
  std::size_t active_features(const History& h, std::int32_t candidate,
                              std::array<FeatureId, kFeatureKindCount>& out) const;

  // `id<TAB>kind<TAB>args...<TAB>count` per feature.
  void dump(std::ostream& out) const;

 private:
  std::vector<Feature> features_;
  std::vector<std::int32_t> indicator_classes_;
  std::unordered_map<FeatureKey, FeatureId, FeatureKeyHash> index_;
};

// All (template, args) tuples whose count-weighted matches reach `threshold`.
FeatureSet instantiate(std::span<const Event> events,
                       std::span<const std::int32_t> indicator_classes,
                       std::int64_t threshold);

// Candidates of a restricted candidate space: the members of one class.
class ClassCandidates {
 public:
  explicit ClassCandidates(std::span<const std::int32_t> members) : members_(members) {}
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }
  std::size_t size() const { return members_.size(); }

 private:
  std::span<const std::int32_t> members_;
};

ClassCandidates restrict_to_class(std::span<const std::int32_t> class_members);

}  // namespace cfme
