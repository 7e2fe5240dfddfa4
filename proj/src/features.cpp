#include "features.hpp"

#include <algorithm>
#include <ostream>

#include "error.hpp"

namespace cfme {

namespace {

constexpr std::array<std::string_view, kFeatureKindCount> kKindNames = {
    "unigram",      "class-bigram",  "class-skip-bigram",        "bigram",
    "skip-bigram",  "class-trigram", "class-bigram-skip-bigram", "bigram-class-skip-bigram"};

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::int32_t indicator_class(std::span<const std::int32_t> classes, WordId w) {
  auto i = static_cast<std::size_t>(w);
  if (i >= classes.size()) fail(ErrorCode::kInvalidArgument, "word id outside indicator map");
  return classes[i];
}

}  // namespace

std::string_view kind_name(FeatureKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<FeatureKind> kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<FeatureKind>(i);
  }
  return std::nullopt;
}

int history_arity(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kUnigram:
      return 0;
    case FeatureKind::kClassBigram:
    case FeatureKind::kClassSkipBigram:
    case FeatureKind::kBigram:
    case FeatureKind::kSkipBigram:
      return 1;
    default:
      return 2;
  }
}

std::size_t FeatureKeyHash::operator()(const FeatureKey& k) const noexcept {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(k.kind) << 56 ^
                          static_cast<std::uint32_t>(k.target));
  h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.a1)) << 32 |
                 static_cast<std::uint32_t>(k.a2)));
  return static_cast<std::size_t>(h);
}

HistoryArgs history_args(FeatureKind kind, const History& h,
                         std::span<const std::int32_t> ic) {
  switch (kind) {
    case FeatureKind::kUnigram:
      return {};
    case FeatureKind::kClassBigram:
      return {indicator_class(ic, h.w1), -1};
    case FeatureKind::kClassSkipBigram:
      return {indicator_class(ic, h.w2), -1};
    case FeatureKind::kBigram:
      return {h.w1, -1};
    case FeatureKind::kSkipBigram:
      return {h.w2, -1};
    case FeatureKind::kClassTrigram:
      return {indicator_class(ic, h.w1), indicator_class(ic, h.w2)};
    case FeatureKind::kClassBigramSkipBigram:
      return {indicator_class(ic, h.w1), h.w2};
    case FeatureKind::kBigramClassSkipBigram:
      return {h.w1, indicator_class(ic, h.w2)};
  }
  fail(ErrorCode::kInvalidArgument, "unknown feature kind");
}

FeatureSet::FeatureSet(std::vector<Feature> features,
                       std::vector<std::int32_t> indicator_classes)
    : features_(std::move(features)), indicator_classes_(std::move(indicator_classes)) {
  std::sort(features_.begin(), features_.end(),
            [](const Feature& a, const Feature& b) { return a.key < b.key; });
  index_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!index_.emplace(features_[i].key, static_cast<FeatureId>(i)).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate feature key");
    }
  }
}

std::optional<FeatureId> FeatureSet::find(const FeatureKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureSet::active_features(const History& h, std::int32_t candidate,
                                        std::array<FeatureId, kFeatureKindCount>& out) const {
  std::size_t n = 0;
  for (FeatureKind kind : kAllFeatureKinds) {
    auto args = history_args(kind, h, indicator_classes_);
    auto it = index_.find(FeatureKey{kind, candidate, args.a1, args.a2});
    if (it != index_.end()) out[n++] = it->second;
  }
  return n;
}

std::vector<FeatureId> FeatureSet::active_features(const History& h,
                                                   std::int32_t candidate) const {
  std::array<FeatureId, kFeatureKindCount> buf{};
  auto n = active_features(h, candidate, buf);
  return {buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n)};
}

void FeatureSet::dump(std::ostream& out) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    out << i << '\t' << kind_name(f.key.kind) << '\t' << f.key.target;
    int arity = history_arity(f.key.kind);
    if (arity >= 1) out << '\t' << f.key.a1;
    if (arity >= 2) out << '\t' << f.key.a2;
    out << '\t' << f.train_count << '\n';
  }
}

FeatureSet instantiate(std::span<const Event> events,
                       std::span<const std::int32_t> indicator_classes,
                       std::int64_t threshold) {
  if (threshold < 1) fail(ErrorCode::kInvalidArgument, "feature threshold must be >= 1");
  std::unordered_map<FeatureKey, std::int64_t, FeatureKeyHash> counts;
  counts.reserve(events.size() * 4);
  for (const auto& e : events) {
    for (FeatureKind kind : kAllFeatureKinds) {
      auto args = history_args(kind, e.history, indicator_classes);
      counts[FeatureKey{kind, e.target, args.a1, args.a2}] += e.count;
    }
  }
  std::vector<Feature> kept;
  for (const auto& [key, count] : counts) {
    if (count >= threshold) kept.push_back(Feature{key, count});
  }
  return FeatureSet(std::move(kept),
                    std::vector<std::int32_t>(indicator_classes.begin(), indicator_classes.end()));
}

ClassCandidates restrict_to_class(std::span<const std::int32_t> class_members) {
  if (class_members.empty()) fail(ErrorCode::kInvalidArgument, "empty class");
  return ClassCandidates(class_members);
}

}  // namespace cfme
