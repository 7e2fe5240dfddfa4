#include "gis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "error.hpp"

namespace cfme {

namespace {

constexpr double kMaxScore = 1e300;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

CandidateSpace::CandidateSpace(std::string descriptor, std::vector<std::int32_t> group_of)
    : descriptor_(std::move(descriptor)), group_of_(std::move(group_of)) {
  std::int32_t max_group = -1;
  for (auto g : group_of_) max_group = std::max(max_group, g);
  groups_.resize(static_cast<std::size_t>(max_group + 1));
  for (std::size_t t = 0; t < group_of_.size(); ++t) {
    if (group_of_[t] >= 0) {
      groups_[static_cast<std::size_t>(group_of_[t])].push_back(static_cast<std::int32_t>(t));
    }
  }
  for (const auto& g : groups_) {
    if (g.empty()) fail(ErrorCode::kInvalidArgument, "candidate space has an empty group");
  }
}

CandidateSpace CandidateSpace::single(std::string descriptor, std::size_t target_count,
                                      std::span<const std::int32_t> candidates) {
  std::vector<std::int32_t> group_of(target_count, -1);
  for (auto t : candidates) {
    if (t < 0 || static_cast<std::size_t>(t) >= target_count) {
      fail(ErrorCode::kInvalidArgument, "candidate outside target range");
    }
    group_of[static_cast<std::size_t>(t)] = 0;
  }
  return CandidateSpace(std::move(descriptor), std::move(group_of));
}

std::int32_t CandidateSpace::group_of(std::int32_t target) const {
  if (target < 0 || static_cast<std::size_t>(target) >= group_of_.size()) return -1;
  return group_of_[static_cast<std::size_t>(target)];
}

std::size_t MaxEntModel::ListKeyHash::operator()(const ListKey& k) const noexcept {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(k.kind) << 32 ^
                          static_cast<std::uint32_t>(k.group));
  h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.a1)) << 32 |
                 static_cast<std::uint32_t>(k.a2)));
  return static_cast<std::size_t>(h);
}

MaxEntModel::MaxEntModel(FeatureSet features, CandidateSpace space, int slack_constant)
    : features_(std::move(features)),
      space_(std::move(space)),
      slack_constant_(slack_constant),
      lambdas_(features_.size() + 1, 0.0) {
  if (slack_constant_ < 1) fail(ErrorCode::kInvalidArgument, "slack constant must be >= 1");
  build_index();
}

void MaxEntModel::build_index() {
  unigram_.assign(space_.target_count(), -1);
  // Features whose target is not a candidate can never fire; they are kept
  // (so ids stay stable) but left out of the lookup tables.
  std::unordered_map<ListKey, std::vector<Firing>, ListKeyHash> lists;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& key = features_.feature(static_cast<FeatureId>(i)).key;
    auto g = space_.group_of(key.target);
    if (g < 0) continue;
    if (key.kind == FeatureKind::kUnigram) {
      unigram_[static_cast<std::size_t>(key.target)] = static_cast<FeatureId>(i);
      continue;
    }
    lists[ListKey{static_cast<std::uint8_t>(key.kind), key.a1, key.a2, g}].push_back(
        Firing{key.target, static_cast<FeatureId>(i)});
  }
  group_begin_.assign(1, 0);
  slot_of_.assign(space_.target_count(), -1);
  slot_unigram_.clear();
  for (std::size_t g = 0; g < space_.group_count(); ++g) {
    for (auto t : space_.group(static_cast<std::int32_t>(g))) {
      slot_of_[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(slot_unigram_.size());
      slot_unigram_.push_back(unigram_[static_cast<std::size_t>(t)]);
    }
    group_begin_.push_back(static_cast<std::int32_t>(slot_unigram_.size()));
  }
  pool_.clear();
  lists_.clear();
  lists_.reserve(lists.size());
  // Ordered by first feature id so the pool layout does not depend on hashing.
  std::vector<std::pair<ListKey, std::vector<Firing>*>> ordered;
  ordered.reserve(lists.size());
  for (auto& [key, list] : lists) ordered.emplace_back(key, &list);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return a.second->front().feature < b.second->front().feature;
  });
  for (auto& [key, list] : ordered) {
    lists_.emplace(key, Range{static_cast<std::uint32_t>(pool_.size()),
                              static_cast<std::uint32_t>(list->size())});
    pool_.insert(pool_.end(), list->begin(), list->end());
  }
}

MaxEntModel::FiringLists MaxEntModel::firing(const History& h, std::int32_t group) const {
  FiringLists out;
  const auto& ic = features_.indicator_classes();
  for (std::size_t k = 1; k < kFeatureKindCount; ++k) {
    auto kind = static_cast<FeatureKind>(k);
    auto args = history_args(kind, h, ic);
    auto it = lists_.find(ListKey{static_cast<std::uint8_t>(k), args.a1, args.a2, group});
    if (it != lists_.end()) {
      out.lists[k - 1] = std::span<const Firing>(pool_.data() + it->second.offset,
                                                  it->second.length);
      out.offsets[k - 1] = it->second.offset;
    }
  }
  return out;
}

namespace {

// Per-thread scratch for the inner loops, sized to the target range.
struct Scratch {
  explicit Scratch(std::size_t targets)
      : extra(targets, 0.0), fired(targets, 0), score(targets, 0.0) {}

  void scatter(const MaxEntModel::FiringLists& f, std::span<const double> lambdas) {
    for (const auto& list : f.lists) {
      for (const auto& [t, fid] : list) {
        auto i = static_cast<std::size_t>(t);
        if (fired[i] == 0) touched.push_back(t);
        ++fired[i];
        extra[i] += lambdas[static_cast<std::size_t>(fid)];
      }
    }
  }

  void clear() {
    for (auto t : touched) {
      auto i = static_cast<std::size_t>(t);
      extra[i] = 0.0;
      fired[i] = 0;
    }
    touched.clear();
  }

  std::vector<double> extra;
  std::vector<std::uint8_t> fired;
  std::vector<double> score;
  std::vector<std::int32_t> touched;
};

struct PartialPass {
  std::vector<double> expected;
  std::vector<double> bulk;  // unigram cache: sum of count/Z per group
  double loglike = 0.0;
  std::int64_t ops = 0;
};

std::int32_t event_group(const MaxEntModel& model, const Event& e) {
  auto g = model.space().group_of(e.target);
  if (g < 0) {
    fail(ErrorCode::kInvalidArgument,
         "event target " + std::to_string(e.target) + " is not in the candidate space");
  }
  return g;
}

void check_normalizer(double z) {
  if (!std::isfinite(z) || z <= 0.0) {
    fail(ErrorCode::kNumeric, "normalizer is not finite and positive");
  }
}

// Works in slot order so the candidates of a group are read and written
// contiguously, and in pool order so the features of a firing list are too.
// Unigram and list-feature expectations are collected in those layouts and
// copied out at the end; every feature has one position, so its sum is
// accumulated in the same order as a direct update.
void plain_pass(const MaxEntModel& model, std::span<const Event> events, PartialPass& out) {
  const auto lambdas = model.lambdas();
  const double c_total = model.slack_constant();
  const double slack_lambda = lambdas[static_cast<std::size_t>(model.slack_id())];
  const auto slack = static_cast<std::size_t>(model.slack_id());
  const auto pool = model.pool();
  std::vector<double> pool_lambda(pool.size());
  for (std::size_t p = 0; p < pool.size(); ++p) {
    pool_lambda[p] = lambdas[static_cast<std::size_t>(pool[p].feature)];
  }
  std::vector<double> pool_mass(pool.size(), 0.0);
  Scratch s(model.slot_count());
  std::vector<double> unigram_mass(model.slot_count(), 0.0);
  for (const auto& e : events) {
    const auto g = event_group(model, e);
    const auto fl = model.firing(e.history, g);
    for (std::size_t k = 0; k < fl.lists.size(); ++k) {
      const auto& list = fl.lists[k];
      const double* lam = pool_lambda.data() + fl.offsets[k];
      for (std::size_t j = 0; j < list.size(); ++j) {
        auto i = static_cast<std::size_t>(model.slot_of(list[j].target));
        if (s.fired[i] == 0) s.touched.push_back(static_cast<std::int32_t>(i));
        ++s.fired[i];
        s.extra[i] += lam[j];
      }
    }
    const auto begin = static_cast<std::size_t>(model.group_begin(g));
    const auto end = static_cast<std::size_t>(model.group_begin(g + 1));
    double z = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      FeatureId u = model.slot_unigram(static_cast<std::int32_t>(i));
      double logit = s.extra[i];
      int n = s.fired[i];
      if (u >= 0) {
        logit += lambdas[static_cast<std::size_t>(u)];
        ++n;
      }
      logit += slack_lambda * (c_total - n);
      double sc = std::exp(logit);
      s.score[i] = sc;
      z += sc;
    }
    check_normalizer(z);
    out.ops += static_cast<std::int64_t>(end - begin);
    const double count = static_cast<double>(e.count);
    const auto target = static_cast<std::size_t>(model.slot_of(e.target));
    out.loglike += count * (std::log(s.score[target]) - std::log(z));
    const double scale = count / z;
    double slack_mass = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double p = s.score[i] * scale;
      int n = s.fired[i];
      if (model.slot_unigram(static_cast<std::int32_t>(i)) >= 0) {
        unigram_mass[i] += p;
        ++n;
      }
      slack_mass += p * (c_total - n);
    }
    out.expected[slack] += slack_mass;
    for (std::size_t k = 0; k < fl.lists.size(); ++k) {
      const auto& list = fl.lists[k];
      double* mass = pool_mass.data() + fl.offsets[k];
      for (std::size_t j = 0; j < list.size(); ++j) {
        mass[j] += s.score[static_cast<std::size_t>(model.slot_of(list[j].target))] * scale;
      }
    }
    s.clear();
  }
  for (std::size_t i = 0; i < unigram_mass.size(); ++i) {
    FeatureId u = model.slot_unigram(static_cast<std::int32_t>(i));
    if (u >= 0) out.expected[static_cast<std::size_t>(u)] += unigram_mass[i];
  }
  for (std::size_t p = 0; p < pool.size(); ++p) {
    out.expected[static_cast<std::size_t>(pool[p].feature)] += pool_mass[p];
  }
}

// Unigram-only scores per candidate and their per-group sums; shared by every
// event of one cached pass.
struct UnigramCache {
  std::vector<double> base;
  std::vector<double> group_sum;
};

UnigramCache build_unigram_cache(const MaxEntModel& model) {
  const auto lambdas = model.lambdas();
  const double c_total = model.slack_constant();
  const double slack_lambda = lambdas[static_cast<std::size_t>(model.slack_id())];
  UnigramCache cache;
  cache.base.assign(model.space().target_count(), 0.0);
  cache.group_sum.assign(model.space().group_count(), 0.0);
  for (std::size_t g = 0; g < model.space().group_count(); ++g) {
    double sum = 0.0;
    for (auto t : model.space().group(static_cast<std::int32_t>(g))) {
      FeatureId u = model.unigram_feature(t);
      double logit = slack_lambda * c_total;
      if (u >= 0) logit = lambdas[static_cast<std::size_t>(u)] + slack_lambda * (c_total - 1);
      double b = std::exp(logit);
      cache.base[static_cast<std::size_t>(t)] = b;
      sum += b;
    }
    cache.group_sum[g] = sum;
  }
  return cache;
}

void cached_pass(const MaxEntModel& model, const UnigramCache& cache,
                 std::span<const Event> events, PartialPass& out) {
  const auto lambdas = model.lambdas();
  const double c_total = model.slack_constant();
  const double slack_lambda = lambdas[static_cast<std::size_t>(model.slack_id())];
  const auto slack = static_cast<std::size_t>(model.slack_id());
  Scratch s(model.space().target_count());
  for (const auto& e : events) {
    const auto g = event_group(model, e);
    const auto fl = model.firing(e.history, g);
    s.scatter(fl, lambdas);
    double z = cache.group_sum[static_cast<std::size_t>(g)];
    for (auto t : s.touched) {
      auto i = static_cast<std::size_t>(t);
      FeatureId u = model.unigram_feature(t);
      double logit = s.extra[i];
      int n = s.fired[i];
      if (u >= 0) {
        logit += lambdas[static_cast<std::size_t>(u)];
        ++n;
      }
      logit += slack_lambda * (c_total - n);
      double sc = std::exp(logit);
      s.score[i] = sc;
      z += sc - cache.base[i];
    }
    check_normalizer(z);
    out.ops += static_cast<std::int64_t>(s.touched.size());
    const auto target = static_cast<std::size_t>(e.target);
    const double target_score = s.fired[target] ? s.score[target] : cache.base[target];
    const double count = static_cast<double>(e.count);
    out.loglike += count * (std::log(target_score) - std::log(z));
    const double scale = count / z;
    out.bulk[static_cast<std::size_t>(g)] += scale;
    // Touched candidates were counted in the bulk term with their unigram
    // score; swap that contribution for the real one.
    for (auto t : s.touched) {
      auto i = static_cast<std::size_t>(t);
      double p = s.score[i] * scale;
      double p_base = cache.base[i] * scale;
      FeatureId u = model.unigram_feature(t);
      int n = s.fired[i];
      int n_base = 0;
      if (u >= 0) {
        out.expected[static_cast<std::size_t>(u)] += p - p_base;
        ++n;
        n_base = 1;
      }
      out.expected[slack] += p * (c_total - n) - p_base * (c_total - n_base);
    }
    for (const auto& list : fl.lists) {
      for (const auto& [t, fid] : list) {
        out.expected[static_cast<std::size_t>(fid)] += s.score[static_cast<std::size_t>(t)] * scale;
      }
    }
    s.clear();
  }
}

}  // namespace

ExpectationResult expectation_pass(const MaxEntModel& model, std::span<const Event> events,
                                   const PassOptions& options) {
  const std::size_t dims = model.features().size() + 1;
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.threads, 1)), 1,
                              std::max<std::size_t>(events.size(), 1));
  UnigramCache cache;
  if (options.unigram_cache) cache = build_unigram_cache(model);

  std::vector<PartialPass> parts(workers);
  for (auto& p : parts) {
    p.expected.assign(dims, 0.0);
    p.bulk.assign(model.space().group_count(), 0.0);
  }
  auto run = [&](std::size_t w) {
    std::size_t begin = events.size() * w / workers;
    std::size_t end = events.size() * (w + 1) / workers;
    auto chunk = events.subspan(begin, end - begin);
    if (options.unigram_cache) {
      cached_pass(model, cache, chunk, parts[w]);
    } else {
      plain_pass(model, chunk, parts[w]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ExpectationResult result;
  result.expected.assign(dims, 0.0);
  std::vector<double> bulk(model.space().group_count(), 0.0);
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < dims; ++j) result.expected[j] += p.expected[j];
    for (std::size_t g = 0; g < bulk.size(); ++g) bulk[g] += p.bulk[g];
    result.loglike += p.loglike;
    result.op_count += p.ops;
  }
  if (options.unigram_cache) {
    const double c_total = model.slack_constant();
    const auto slack = static_cast<std::size_t>(model.slack_id());
    for (std::size_t g = 0; g < bulk.size(); ++g) {
      if (bulk[g] == 0.0) continue;
      for (auto t : model.space().group(static_cast<std::int32_t>(g))) {
        double mass = cache.base[static_cast<std::size_t>(t)] * bulk[g];
        FeatureId u = model.unigram_feature(t);
        if (u >= 0) {
          result.expected[static_cast<std::size_t>(u)] += mass;
          result.expected[slack] += mass * (c_total - 1);
        } else {
          result.expected[slack] += mass * c_total;
        }
      }
    }
  }
  return result;
}

int compute_slack_constant(const FeatureSet& features, const CandidateSpace& space,
                           std::span<const Event> events) {
  MaxEntModel probe(features, space, 1);
  std::vector<char> group_has_unigram(space.group_count(), 0);
  for (std::size_t g = 0; g < space.group_count(); ++g) {
    for (auto t : space.group(static_cast<std::int32_t>(g))) {
      if (probe.unigram_feature(t) >= 0) group_has_unigram[g] = 1;
    }
  }
  std::vector<int> fired(space.target_count(), 0);
  std::vector<std::int32_t> touched;
  int best = 0;
  for (const auto& e : events) {
    auto g = space.group_of(e.target);
    if (g < 0) fail(ErrorCode::kInvalidArgument, "event target is not in the candidate space");
    best = std::max(best, static_cast<int>(group_has_unigram[static_cast<std::size_t>(g)]));
    auto fl = probe.firing(e.history, g);
    for (const auto& list : fl.lists) {
      for (const auto& f : list) {
        auto i = static_cast<std::size_t>(f.target);
        if (fired[i] == 0) touched.push_back(f.target);
        ++fired[i];
      }
    }
    for (auto t : touched) {
      int n = fired[static_cast<std::size_t>(t)] + (probe.unigram_feature(t) >= 0 ? 1 : 0);
      best = std::max(best, n);
      fired[static_cast<std::size_t>(t)] = 0;
    }
    touched.clear();
  }
  return std::max(best, 1);
}

MaxEntModel make_model(FeatureSet features, CandidateSpace space,
                       std::span<const Event> events) {
  int c = compute_slack_constant(features, space, events);
  return MaxEntModel(std::move(features), std::move(space), c);
}

int firing_count(const MaxEntModel& model, const History& h, std::int32_t candidate) {
  std::array<FeatureId, kFeatureKindCount> buf{};
  auto n = model.features().active_features(h, candidate, buf);
  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    // Features on non-candidates never fire inside this model.
    if (model.space().group_of(model.features().feature(buf[i]).key.target) >= 0) ++count;
  }
  return count;
}

double unnormalized_score(const MaxEntModel& model, const History& h, std::int32_t candidate) {
  if (model.space().group_of(candidate) < 0) return 0.0;
  std::array<FeatureId, kFeatureKindCount> buf{};
  auto n = model.features().active_features(h, candidate, buf);
  const auto lambdas = model.lambdas();
  double logit = 0.0;
  for (std::size_t i = 0; i < n; ++i) logit += lambdas[static_cast<std::size_t>(buf[i])];
  logit += lambdas[static_cast<std::size_t>(model.slack_id())] *
           (model.slack_constant() - static_cast<int>(n));
  double score = std::exp(logit);
  if (!(score <= kMaxScore)) {
    fail(ErrorCode::kNumeric, "unnormalized score overflow (log score " +
                                  std::to_string(logit) + ")");
  }
  return score;
}

double normalizer(const MaxEntModel& model, const History& h, std::int32_t group) {
  if (group < 0 || static_cast<std::size_t>(group) >= model.space().group_count()) {
    fail(ErrorCode::kInvalidArgument, "group out of range");
  }
  double z = 0.0;
  for (auto t : model.space().group(group)) z += unnormalized_score(model, h, t);
  return z;
}

double probability(const MaxEntModel& model, const History& h, std::int32_t target) {
  auto g = model.space().group_of(target);
  if (g < 0) return 0.0;
  auto dist = group_distribution(model, h, g);
  const auto& cands = model.space().group(g);
  auto it = std::lower_bound(cands.begin(), cands.end(), target);
  return dist[static_cast<std::size_t>(it - cands.begin())];
}

std::vector<double> group_distribution(const MaxEntModel& model, const History& h,
                                       std::int32_t group) {
  if (group < 0 || static_cast<std::size_t>(group) >= model.space().group_count()) {
    fail(ErrorCode::kInvalidArgument, "group out of range");
  }
  const auto lambdas = model.lambdas();
  const double c_total = model.slack_constant();
  const double slack_lambda = lambdas[static_cast<std::size_t>(model.slack_id())];
  const auto& cands = model.space().group(group);
  const auto fl = model.firing(h, group);
  std::unordered_map<std::int32_t, std::pair<double, int>> extra;
  for (const auto& list : fl.lists) {
    for (const auto& [t, fid] : list) {
      auto& slot = extra[t];
      slot.first += lambdas[static_cast<std::size_t>(fid)];
      ++slot.second;
    }
  }
  std::vector<double> out(cands.size());
  double z = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto t = cands[i];
    double logit = 0.0;
    int n = 0;
    if (auto it = extra.find(t); it != extra.end()) {
      logit = it->second.first;
      n = it->second.second;
    }
    FeatureId u = model.unigram_feature(t);
    if (u >= 0) {
      logit += lambdas[static_cast<std::size_t>(u)];
      ++n;
    }
    logit += slack_lambda * (c_total - n);
    out[i] = std::exp(logit);
    z += out[i];
  }
  check_normalizer(z);
  for (auto& p : out) p /= z;
  return out;
}

std::vector<double> empirical_counts(const MaxEntModel& model, std::span<const Event> events) {
  std::vector<double> emp(model.features().size() + 1, 0.0);
  const auto slack = static_cast<std::size_t>(model.slack_id());
  std::array<FeatureId, kFeatureKindCount> buf{};
  for (const auto& e : events) {
    (void)event_group(model, e);
    auto n = model.features().active_features(e.history, e.target, buf);
    const double count = static_cast<double>(e.count);
    for (std::size_t i = 0; i < n; ++i) emp[static_cast<std::size_t>(buf[i])] += count;
    emp[slack] += count * (model.slack_constant() - static_cast<int>(n));
  }
  return emp;
}

void update_lambdas(MaxEntModel& model, std::span<const double> empirical,
                    std::span<const double> expected) {
  auto lambdas = model.mutable_lambdas();
  if (empirical.size() != lambdas.size() || expected.size() != lambdas.size()) {
    fail(ErrorCode::kInvalidArgument, "expectation vectors do not match the model");
  }
  const double inv_c = 1.0 / model.slack_constant();
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    if (empirical[j] <= 0.0) continue;
    if (!(expected[j] > 0.0)) {
      fail(ErrorCode::kInvariant, "feature " + std::to_string(j) +
                                      " has empirical mass but zero model expectation");
    }
    double next = lambdas[j] + inv_c * std::log(empirical[j] / expected[j]);
    if (!std::isfinite(next)) fail(ErrorCode::kNumeric, "lambda update is not finite");
    lambdas[j] = next;
  }
}

double max_relative_deviation(std::span<const double> empirical,
                              std::span<const double> expected) {
  double worst = 0.0;
  for (std::size_t j = 0; j < empirical.size(); ++j) {
    if (empirical[j] <= 0.0) continue;
    worst = std::max(worst, std::abs(expected[j] / empirical[j] - 1.0));
  }
  return worst;
}

TrainLog train(MaxEntModel& model, std::span<const Event> events, const GisOptions& options) {
  if (options.iterations < 1) fail(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  using clock = std::chrono::steady_clock;
  TrainLog log;
  log.event_count = static_cast<std::int64_t>(events.size());
  TrainerState& state = log.final_state;
  state.empirical = empirical_counts(model, events);
  const PassOptions pass{options.unigram_cache, options.threads};
  for (int it = 1; it <= options.iterations; ++it) {
    auto t0 = clock::now();
    auto res = expectation_pass(model, events, pass);
    if (!std::isfinite(res.loglike)) {
      fail(ErrorCode::kNumeric, "training log-likelihood is not finite at iteration " +
                                    std::to_string(it));
    }
    IterationRecord rec;
    rec.iteration = it;
    rec.loglike = res.loglike;
    rec.op_count = res.op_count;
    rec.max_deviation = max_relative_deviation(state.empirical, res.expected);
    state.expected = std::move(res.expected);
    state.iteration = it;
    state.train_loglike = res.loglike;
    state.op_counter += res.op_count;
    bool done = rec.max_deviation <= options.tolerance;
    if (!done) update_lambdas(model, state.empirical, state.expected);
    rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    log.iterations.push_back(rec);
    model.add_iterations(done ? 0 : 1);
    if (done) {
      log.converged = true;
      break;
    }
  }
  return log;
}

TrainLog train_unigram_cached(MaxEntModel& model, std::span<const Event> events,
                              GisOptions options) {
  options.unigram_cache = true;
  return train(model, events, options);
}

void save_model(std::ostream& out, const MaxEntModel& model) {
  out << "candidate_space " << model.space().descriptor() << '\n';
  out << "C " << model.slack_constant() << '\n';
  out << "feature_count " << model.features().size() << '\n';
  out << "iterations " << model.iterations() << '\n';
  const auto lambdas = model.lambdas();
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < model.features().size(); ++i) {
    const auto& key = model.features().feature(static_cast<FeatureId>(i)).key;
    out << i << '\t' << kind_name(key.kind) << '\t' << key.target;
    int arity = history_arity(key.kind);
    if (arity >= 1) out << '\t' << key.a1;
    if (arity >= 2) out << '\t' << key.a2;
    out << '\t' << lambdas[i] << '\n';
  }
  out << model.features().size() << "\tslack\t" << lambdas.back() << '\n';
  out.precision(old_precision);
}

ModelFile read_model_file(std::istream& in) {
  ModelFile file;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kFormat, "model file line " + std::to_string(line_no) + ": " + why);
  };
  auto header = [&](std::string_view key) {
    ++line_no;
    if (!std::getline(in, line)) bad("missing header '" + std::string(key) + "'");
    if (line.rfind(std::string(key) + " ", 0) != 0) bad("expected '" + std::string(key) + "'");
    return line.substr(key.size() + 1);
  };
  file.candidate_space = header("candidate_space");
  std::size_t feature_count = 0;
  try {
    file.slack_constant = std::stoi(header("C"));
    feature_count = std::stoul(header("feature_count"));
    file.iterations = std::stoi(header("iterations"));
  } catch (const std::logic_error&) {
    bad("malformed header value");
  }
  file.keys.reserve(feature_count);
  file.lambdas.reserve(feature_count + 1);
  for (std::size_t i = 0; i <= feature_count; ++i) {
    ++line_no;
    if (!std::getline(in, line)) bad("truncated feature list");
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    try {
      if (cols.size() < 3 || std::stoul(cols[0]) != i) bad("feature ids out of order");
      if (i == feature_count) {
        if (cols[1] != "slack" || cols.size() != 3) bad("expected slack feature last");
        file.lambdas.push_back(std::stod(cols[2]));
        break;
      }
      auto kind = kind_from_name(cols[1]);
      if (!kind) bad("unknown feature kind '" + cols[1] + "'");
      const auto arity = static_cast<std::size_t>(history_arity(*kind));
      if (cols.size() != 4 + arity) bad("wrong number of columns");
      FeatureKey key{*kind, std::stoi(cols[2]), -1, -1};
      if (arity >= 1) key.a1 = std::stoi(cols[3]);
      if (arity >= 2) key.a2 = std::stoi(cols[4]);
      file.keys.push_back(key);
      file.lambdas.push_back(std::stod(cols.back()));
    } catch (const std::logic_error&) {
      bad("malformed number");
    }
  }
  for (double l : file.lambdas) {
    if (!std::isfinite(l)) fail(ErrorCode::kFormat, "non-finite lambda in model file");
  }
  return file;
}

MaxEntModel model_from_file(const ModelFile& file, CandidateSpace space,
                            std::vector<std::int32_t> indicator_classes) {
  std::vector<Feature> features;
  features.reserve(file.keys.size());
  for (const auto& k : file.keys) features.push_back(Feature{k, 0});
  FeatureSet set(std::move(features), std::move(indicator_classes));
  for (std::size_t i = 0; i < file.keys.size(); ++i) {
    if (!(set.feature(static_cast<FeatureId>(i)).key == file.keys[i])) {
      fail(ErrorCode::kFormat, "model file features are not in canonical order");
    }
  }
  MaxEntModel model(std::move(set), std::move(space), file.slack_constant);
  auto lambdas = model.mutable_lambdas();
  std::copy(file.lambdas.begin(), file.lambdas.end(), lambdas.begin());
  model.add_iterations(file.iterations);
  return model;
}

}  // namespace cfme
