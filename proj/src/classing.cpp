#include "classing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "error.hpp"

namespace cfme {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

ClassHierarchy::ClassHierarchy(std::vector<std::vector<ClassId>> class_of)
    : class_of_(std::move(class_of)) {
  if (class_of_.empty() || class_of_.size() > kMaxLevels) {
    fail(ErrorCode::kInvalidArgument, "class hierarchy needs 1 to 3 levels");
  }
  const std::size_t v = class_of_.front().size();
  for (std::size_t level = 0; level < class_of_.size(); ++level) {
    const auto& map = class_of_[level];
    if (map.size() != v) fail(ErrorCode::kFormat, "class levels cover different vocabularies");
    ClassId max_id = -1;
    for (ClassId c : map) {
      if (c < 0) fail(ErrorCode::kFormat, "negative class id");
      max_id = std::max(max_id, c);
    }
    std::vector<char> seen(static_cast<std::size_t>(max_id + 1), 0);
    for (ClassId c : map) seen[static_cast<std::size_t>(c)] = 1;
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      fail(ErrorCode::kFormat, "class ids at level " + std::to_string(level) +
                                   " are not dense");
    }
    counts_.push_back(seen.size());
    if (level > 0) {
      std::vector<ClassId> parent(seen.size(), -1);
      const auto& coarse = class_of_[level - 1];
      for (std::size_t w = 0; w < v; ++w) {
        auto& p = parent[static_cast<std::size_t>(map[w])];
        if (p == -1) {
          p = coarse[w];
        } else if (p != coarse[w]) {
          fail(ErrorCode::kFormat, "class " + std::to_string(map[w]) + " at level " +
                                       std::to_string(level) + " is not nested");
        }
      }
      parents_.push_back(std::move(parent));
    }
  }
}

std::vector<WordId> ClassHierarchy::members(std::size_t level, ClassId cls) const {
  std::vector<WordId> out;
  const auto& map = class_of_.at(level);
  for (std::size_t w = 0; w < map.size(); ++w) {
    if (map[w] == cls) out.push_back(static_cast<WordId>(w));
  }
  return out;
}

void ClassHierarchy::save(std::ostream& out, const Vocabulary& vocab) const {
  if (vocab.size() != vocab_size()) {
    fail(ErrorCode::kInvalidArgument, "vocabulary does not match class map");
  }
  for (std::size_t w = 0; w < vocab_size(); ++w) {
    out << vocab.words()[w] << '\t';
    for (std::size_t level = 0; level < levels(); ++level) {
      if (level) out << '/';
      out << class_of_[level][w];
    }
    out << '\n';
  }
}

void ClassHierarchy::save(const std::filesystem::path& path,
                          const Vocabulary& vocab) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  save(out, vocab);
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

ClassHierarchy ClassHierarchy::load(std::istream& in, const Vocabulary& vocab) {
  std::vector<std::vector<ClassId>> paths(vocab.size());
  std::string line;
  std::size_t line_no = 0;
  std::size_t depth = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorCode::kFormat, "class map line " + std::to_string(line_no) + ": missing tab");
    }
    auto id = vocab.find(std::string_view(line).substr(0, tab));
    if (!id) continue;  // words outside the vocabulary are ignored
    std::vector<ClassId> path;
    std::stringstream ss(line.substr(tab + 1));
    std::string part;
    while (std::getline(ss, part, '/')) {
      try {
        std::size_t used = 0;
        long v = std::stol(part, &used);
        if (used != part.size() || v < 0) throw std::invalid_argument(part);
        path.push_back(static_cast<ClassId>(v));
      } catch (const std::logic_error&) {
        fail(ErrorCode::kFormat, "class map line " + std::to_string(line_no) +
                                     ": bad class id '" + part + "'");
      }
    }
    if (path.empty() || path.size() > kMaxLevels) {
      fail(ErrorCode::kFormat, "class map line " + std::to_string(line_no) +
                                   ": expected 1 to 3 levels");
    }
    if (depth == 0) depth = path.size();
    if (path.size() != depth) {
      fail(ErrorCode::kFormat, "class map line " + std::to_string(line_no) +
                                   ": inconsistent number of levels");
    }
    paths[static_cast<std::size_t>(*id)] = std::move(path);
  }
  std::vector<std::vector<ClassId>> class_of(depth, std::vector<ClassId>(vocab.size()));
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    if (paths[w].empty()) {
      fail(ErrorCode::kFormat, "class map has no entry for '" + vocab.words()[w] + "'");
    }
    for (std::size_t level = 0; level < depth; ++level) class_of[level][w] = paths[w][level];
  }
  return ClassHierarchy(std::move(class_of));
}

ClassHierarchy ClassHierarchy::load(const std::filesystem::path& path,
                                    const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return load(in, vocab);
}

namespace {

// Incremental state of the class-bigram objective during top-down splitting.
// Predicted words are indexed locally by u = id - first_output.
class Inducer {
 public:
  Inducer(std::span<const Event> events, const Vocabulary& vocab, int max_classes,
          const InductionOptions& options, InductionStats* stats)
      : first_(vocab.first_output()),
        n_(vocab.output_count()),
        kmax_(static_cast<std::size_t>(max_classes)),
        start_(kmax_),
        options_(options),
        stats_(stats),
        unigram_(n_, 0),
        pred_(n_),
        succ_(n_),
        self_(n_, 0),
        cls_(n_, 0),
        matrix_((kmax_ + 1) * kmax_, 0),
        row_(kmax_ + 1, 0),
        col_(kmax_, 0) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> bigrams;
    for (const auto& e : events) {
      if (!vocab.is_output(e.target)) {
        fail(ErrorCode::kInvalidArgument, "event target is not a predicted word");
      }
      std::int64_t prev = e.history.w1 == Vocabulary::kSentenceStart
                              ? -1
                              : static_cast<std::int64_t>(e.history.w1 - first_);
      if (prev >= static_cast<std::int64_t>(n_)) {
        fail(ErrorCode::kInvalidArgument, "history word out of range");
      }
      bigrams[{prev, e.target - first_}] += e.count;
    }
    for (const auto& [key, count] : bigrams) {
      auto [prev, cur] = key;
      unigram_[static_cast<std::size_t>(cur)] += count;
      if (prev == cur) {
        self_[static_cast<std::size_t>(cur)] += count;
      } else {
        pred_[static_cast<std::size_t>(cur)].push_back({prev, count});
        if (prev >= 0) succ_[static_cast<std::size_t>(prev)].push_back({cur, count});
      }
    }
    // Everything starts in class 0.
    for (std::size_t u = 0; u < n_; ++u) {
      for (const auto& [prev, count] : pred_[u]) {
        at(prev < 0 ? start_ : 0, 0) += count;
      }
      at(0, 0) += self_[u];
    }
    recompute_sums();
    members_.push_back({});
    for (std::size_t u = 0; u < n_; ++u) members_[0].push_back(static_cast<std::int32_t>(u));
    objective_ = full_objective();
    record();
  }

  std::size_t class_count() const { return members_.size(); }

  // Splits until `target` classes exist.
  void grow_to(std::size_t target) {
    while (members_.size() < target) split(pick_class());
  }

  std::vector<ClassId> word_classes(std::size_t vocab_size) const {
    std::vector<ClassId> out(vocab_size, 0);
    for (std::size_t u = 0; u < n_; ++u) out[u + static_cast<std::size_t>(first_)] = cls_[u];
    return out;
  }

 private:
  struct Link {
    std::int64_t word;  // local index, or -1 for sentence start
    std::int64_t count;
  };

  std::int64_t& at(std::size_t ctx, std::size_t c) { return matrix_[ctx * kmax_ + c]; }

  void recompute_sums() {
    std::fill(row_.begin(), row_.end(), 0);
    std::fill(col_.begin(), col_.end(), 0);
    for (std::size_t ctx = 0; ctx <= kmax_; ++ctx) {
      for (std::size_t c = 0; c < kmax_; ++c) {
        row_[ctx] += at(ctx, c);
        col_[c] += at(ctx, c);
      }
    }
  }

  double full_objective() {
    double obj = 0.0;
    for (auto v : matrix_) obj += xlogx(static_cast<double>(v));
    for (auto v : row_) obj -= xlogx(static_cast<double>(v));
    for (auto v : col_) obj -= xlogx(static_cast<double>(v));
    for (auto v : unigram_) obj += xlogx(static_cast<double>(v));
    return obj;
  }

  void record() {
    if (stats_) stats_->objective_trace.push_back(objective_);
  }

  double class_entropy(std::size_t c) const {
    double h = xlogx(static_cast<double>(col_[c]));
    for (auto u : members_[c]) h -= xlogx(static_cast<double>(unigram_[static_cast<std::size_t>(u)]));
    return h;
  }

  std::size_t pick_class() const {
    std::size_t best = members_.size();
    double best_h = -1.0;
    for (std::size_t c = 0; c < members_.size(); ++c) {
      if (members_[c].size() < 2) continue;
      double h = class_entropy(c);
      if (best == members_.size() || h > best_h + 1e-9 ||
          (std::abs(h - best_h) <= 1e-9 && members_[c].size() > members_[best].size())) {
        best = c;
        best_h = h;
      }
    }
    if (best == members_.size()) fail(ErrorCode::kInvariant, "no class left to split");
    return best;
  }

  // Net matrix changes caused by moving word u from its class to `to`.
  struct Change {
    std::size_t index;
    std::int64_t delta;
  };

  void collect_changes(std::size_t u, std::size_t to, std::vector<Change>& changes,
                       std::int64_t& in_total, std::int64_t& out_total) {
    const std::size_t from = static_cast<std::size_t>(cls_[u]);
    changes.clear();
    in_total = self_[u];
    out_total = self_[u];
    for (const auto& [prev, count] : pred_[u]) {
      std::size_t ctx = prev < 0 ? start_ : static_cast<std::size_t>(cls_[static_cast<std::size_t>(prev)]);
      changes.push_back({ctx * kmax_ + from, -count});
      changes.push_back({ctx * kmax_ + to, count});
      in_total += count;
    }
    for (const auto& [next, count] : succ_[u]) {
      std::size_t c = static_cast<std::size_t>(cls_[static_cast<std::size_t>(next)]);
      changes.push_back({from * kmax_ + c, -count});
      changes.push_back({to * kmax_ + c, count});
      out_total += count;
    }
    changes.push_back({from * kmax_ + from, -self_[u]});
    changes.push_back({to * kmax_ + to, self_[u]});
    std::sort(changes.begin(), changes.end(),
              [](const Change& a, const Change& b) { return a.index < b.index; });
    std::size_t k = 0;
    for (std::size_t i = 0; i < changes.size(); ++i) {
      if (k > 0 && changes[k - 1].index == changes[i].index) {
        changes[k - 1].delta += changes[i].delta;
      } else {
        changes[k++] = changes[i];
      }
    }
    changes.resize(k);
  }

  double move_delta(std::size_t u, std::size_t to) {
    const std::size_t from = static_cast<std::size_t>(cls_[u]);
    std::int64_t in_total, out_total;
    collect_changes(u, to, changes_, in_total, out_total);
    double d = 0.0;
    for (const auto& ch : changes_) {
      if (ch.delta == 0) continue;
      double old_v = static_cast<double>(matrix_[ch.index]);
      d += xlogx(old_v + static_cast<double>(ch.delta)) - xlogx(old_v);
    }
    auto shift = [&](const std::vector<std::int64_t>& sums, std::int64_t amount) {
      double a = static_cast<double>(sums[from]);
      double b = static_cast<double>(sums[to]);
      double m = static_cast<double>(amount);
      return xlogx(a - m) - xlogx(a) + xlogx(b + m) - xlogx(b);
    };
    d -= shift(row_, out_total);
    d -= shift(col_, in_total);
    return d;
  }

  void apply_move(std::size_t u, std::size_t to) {
    const std::size_t from = static_cast<std::size_t>(cls_[u]);
    std::int64_t in_total, out_total;
    collect_changes(u, to, changes_, in_total, out_total);
    for (const auto& ch : changes_) matrix_[ch.index] += ch.delta;
    row_[from] -= out_total;
    row_[to] += out_total;
    col_[from] -= in_total;
    col_[to] += in_total;
    cls_[u] = static_cast<ClassId>(to);
  }

  std::vector<ClassId> side_of(const std::vector<std::int32_t>& words) const {
    std::vector<ClassId> out;
    for (auto w : words) out.push_back(cls_[static_cast<std::size_t>(w)]);
    return out;
  }

  void assign(const std::vector<std::int32_t>& words, const std::vector<ClassId>& target,
              std::size_t sizes[2], std::size_t parent) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto u = static_cast<std::size_t>(words[i]);
      if (cls_[u] == target[i]) continue;
      objective_ += move_delta(u, static_cast<std::size_t>(target[i]));
      apply_move(u, static_cast<std::size_t>(target[i]));
    }
    sizes[0] = sizes[1] = 0;
    for (auto c : target) ++sizes[static_cast<std::size_t>(c) == parent ? 0 : 1];
  }

  // Single-word exchange passes between the two halves until no move gains.
  void exchange(std::size_t parent, std::size_t fresh, const std::vector<std::int32_t>& order,
                std::size_t sizes[2], bool log) {
    std::vector<std::int32_t> visit = order;
    if (options_.seed != 0) {
      std::mt19937_64 rng(options_.seed + fresh);
      std::shuffle(visit.begin(), visit.end(), rng);
    }
    for (int pass = 0; pass < options_.max_passes; ++pass) {
      bool moved = false;
      for (auto w : visit) {
        const std::size_t u = static_cast<std::size_t>(w);
        const std::size_t from = static_cast<std::size_t>(cls_[u]);
        const std::size_t to = from == parent ? fresh : parent;
        std::size_t& from_size = sizes[from == parent ? 0 : 1];
        if (from_size < 2) continue;
        double d = move_delta(u, to);
        if (d > kMinGain) {
          apply_move(u, to);
          --from_size;
          ++sizes[to == parent ? 0 : 1];
          objective_ += d;
          moved = true;
          if (log) {
            if (stats_) ++stats_->moves;
            record();
          }
        }
      }
      if (!moved) break;
    }
  }

  void split(std::size_t parent) {
    const std::size_t fresh = members_.size();
    if (fresh >= kmax_) fail(ErrorCode::kInvariant, "class capacity exceeded");
    std::vector<std::int32_t> order = members_[parent];
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
      return unigram_[static_cast<std::size_t>(a)] > unigram_[static_cast<std::size_t>(b)];
    });
    for (std::size_t i = 1; i < order.size(); i += 2) {
      const auto u = static_cast<std::size_t>(order[i]);
      objective_ += move_delta(u, fresh);
      apply_move(u, fresh);
    }
    std::size_t sizes[2] = {(order.size() + 1) / 2, order.size() / 2};
    record();

    exchange(parent, fresh, order, sizes, true);

    // Extra starts from random halves on small classes; the best local
    // optimum wins and only an improvement is recorded.
    if (order.size() <= options_.restart_limit) {
      std::mt19937_64 rng(options_.seed * 0x9e3779b97f4a7c15ULL + fresh);
      std::vector<ClassId> best = side_of(order);
      double best_objective = objective_;
      for (int r = 0; r < options_.restarts; ++r) {
        std::vector<std::size_t> slot(order.size());
        std::iota(slot.begin(), slot.end(), std::size_t{0});
        std::shuffle(slot.begin(), slot.end(), rng);
        std::vector<ClassId> start(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
          start[slot[i]] = static_cast<ClassId>(i % 2 ? fresh : parent);
        }
        assign(order, start, sizes, parent);
        exchange(parent, fresh, order, sizes, false);
        if (objective_ > best_objective + kMinGain) {
          best = side_of(order);
          best_objective = objective_;
        }
      }
      assign(order, best, sizes, parent);
      if (stats_ && objective_ > stats_->objective_trace.back()) record();
    }

    members_.push_back({});
    std::vector<std::int32_t> keep;
    for (auto w : order) {
      if (static_cast<std::size_t>(cls_[static_cast<std::size_t>(w)]) == parent) {
        keep.push_back(w);
      } else {
        members_[fresh].push_back(w);
      }
    }
    std::sort(keep.begin(), keep.end());
    std::sort(members_[fresh].begin(), members_[fresh].end());
    members_[parent] = std::move(keep);
    if (stats_) ++stats_->splits;
  }

  static constexpr double kMinGain = 1e-7;

  WordId first_;
  std::size_t n_;
  std::size_t kmax_;
  std::size_t start_;
  InductionOptions options_;
  InductionStats* stats_;
  std::vector<std::int64_t> unigram_;
  std::vector<std::vector<Link>> pred_;
  std::vector<std::vector<Link>> succ_;
  std::vector<std::int64_t> self_;
  std::vector<ClassId> cls_;
  std::vector<std::int64_t> matrix_;
  std::vector<std::int64_t> row_;
  std::vector<std::int64_t> col_;
  std::vector<std::vector<std::int32_t>> members_;
  std::vector<Change> changes_;
  double objective_ = 0.0;
};

void check_sizes(std::span<const int> level_sizes, std::size_t outputs) {
  if (level_sizes.empty() || level_sizes.size() > ClassHierarchy::kMaxLevels) {
    fail(ErrorCode::kInvalidArgument, "need 1 to 3 class levels");
  }
  int prev = 0;
  for (int s : level_sizes) {
    if (s < 1) fail(ErrorCode::kInvalidArgument, "class counts must be >= 1");
    if (s <= prev) fail(ErrorCode::kInvalidArgument, "class counts must be strictly increasing");
    if (static_cast<std::size_t>(s) > outputs) {
      fail(ErrorCode::kInvalidArgument,
           "requested " + std::to_string(s) + " classes for " + std::to_string(outputs) +
               " predicted words");
    }
    prev = s;
  }
}

}  // namespace

ClassHierarchy build_hierarchy(std::span<const Event> events, const Vocabulary& vocab,
                               std::span<const int> level_sizes,
                               const InductionOptions& options, InductionStats* stats) {
  check_sizes(level_sizes, vocab.output_count());
  Inducer inducer(events, vocab, level_sizes.back(), options, stats);
  std::vector<std::vector<ClassId>> class_of;
  for (int size : level_sizes) {
    inducer.grow_to(static_cast<std::size_t>(size));
    class_of.push_back(inducer.word_classes(vocab.size()));
  }
  // Splitting only moves words between the two halves of one class, so the
  // class a word held at an earlier snapshot is its ancestor now.
  return ClassHierarchy(std::move(class_of));
}

ClassHierarchy induce_classes(std::span<const Event> events, const Vocabulary& vocab,
                              int num_classes, const InductionOptions& options,
                              InductionStats* stats) {
  const int sizes[] = {num_classes};
  return build_hierarchy(events, vocab, sizes, options, stats);
}

ClassHierarchy uniform_hierarchy(const Vocabulary& vocab, std::span<const int> level_sizes) {
  check_sizes(level_sizes, vocab.output_count());
  const std::size_t n = vocab.output_count();
  const auto finest = static_cast<std::size_t>(level_sizes.back());
  std::vector<std::vector<ClassId>> class_of(level_sizes.size(),
                                             std::vector<ClassId>(vocab.size(), 0));
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t leaf = u * finest / n;
    for (std::size_t level = 0; level < level_sizes.size(); ++level) {
      class_of[level][u + static_cast<std::size_t>(vocab.first_output())] =
          static_cast<ClassId>(leaf * static_cast<std::size_t>(level_sizes[level]) / finest);
    }
  }
  return ClassHierarchy(std::move(class_of));
}

double class_bigram_loglik(std::span<const Event> events, const Vocabulary& vocab,
                           std::span<const ClassId> class_of) {
  constexpr std::int64_t kStart = -1;
  std::map<std::pair<std::int64_t, std::int64_t>, double> pair_counts;
  std::map<std::int64_t, double> prev_counts, class_counts;
  std::map<WordId, double> word_counts;
  for (const auto& e : events) {
    std::int64_t c1 = e.history.w1 == Vocabulary::kSentenceStart
                          ? kStart
                          : class_of[static_cast<std::size_t>(e.history.w1)];
    std::int64_t c2 = class_of[static_cast<std::size_t>(e.target)];
    auto n = static_cast<double>(e.count);
    pair_counts[{c1, c2}] += n;
    prev_counts[c1] += n;
    class_counts[c2] += n;
    word_counts[e.target] += n;
  }
  (void)vocab;
  double ll = 0.0;
  for (const auto& [key, n] : pair_counts) ll += n * std::log(n / prev_counts[key.first]);
  for (const auto& [w, n] : word_counts) {
    ll += n * std::log(n / class_counts[class_of[static_cast<std::size_t>(w)]]);
  }
  return ll;
}

std::vector<int> default_level_sizes(std::size_t output_count, int class_levels) {
  const double n = static_cast<double>(std::max<std::size_t>(output_count, 1));
  auto clamp = [&](double v) {
    return static_cast<int>(std::clamp(std::round(v), 1.0, n));
  };
  if (class_levels == 1) return {clamp(std::sqrt(n))};
  if (class_levels == 2) {
    int a = clamp(std::cbrt(n));
    int b = std::max(a + 1, clamp(std::cbrt(n) * std::cbrt(n)));
    if (static_cast<std::size_t>(b) > output_count) b = static_cast<int>(output_count);
    return {a, b};
  }
  fail(ErrorCode::kInvalidArgument, "class_levels must be 1 or 2");
}

}  // namespace cfme
