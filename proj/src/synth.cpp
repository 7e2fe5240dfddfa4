#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "error.hpp"

namespace cfme {

namespace {

// Inverse-CDF sampling over fixed weights.
class Table {
 public:
  explicit Table(const std::vector<double>& weights) : cdf_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
  }
  std::size_t draw(std::mt19937_64& rng) const {
    double u = std::uniform_real_distribution<double>(0.0, cdf_.back())(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

std::size_t generate_corpus(const SynthConfig& config, std::ostream& out) {
  if (config.vocab_size < 1 || config.classes < 1 || config.classes > config.vocab_size) {
    fail(ErrorCode::kInvalidArgument, "synthetic corpus needs 1 <= classes <= vocab_size");
  }
  if (config.min_length < 1 || config.max_length < config.min_length) {
    fail(ErrorCode::kInvalidArgument, "invalid sentence length range");
  }
  if (config.successors < 1 || config.zipf < 0.0) {
    fail(ErrorCode::kInvalidArgument, "invalid synthetic chain parameters");
  }
  std::mt19937_64 rng(config.seed);
  const auto k = static_cast<std::size_t>(config.classes);

  std::vector<std::vector<int>> members(k);
  for (int r = 0; r < config.vocab_size; ++r) members[static_cast<std::size_t>(r) % k].push_back(r);
  std::vector<Table> emit;
  for (const auto& m : members) {
    std::vector<double> w(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) w[i] = std::pow(static_cast<double>(i + 1), -config.zipf);
    emit.emplace_back(w);
  }

  // Row k is the sentence-start state.
  std::exponential_distribution<double> expo(1.0);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  const auto fanout = std::min<std::size_t>(static_cast<std::size_t>(config.successors), k);
  std::vector<Table> next;
  for (std::size_t c = 0; c <= k; ++c) {
    std::vector<double> w(k, 0.0);
    for (std::size_t j = 0; j < fanout; ++j) w[pick(rng)] += expo(rng);
    next.emplace_back(w);
  }

  std::uniform_int_distribution<int> length(config.min_length, config.max_length);
  std::size_t written = 0;
  while (written < config.tokens) {
    int n = length(rng);
    std::size_t state = k;
    for (int i = 0; i < n; ++i) {
      state = next[state].draw(rng);
      const auto& m = members[state];
      if (i) out << ' ';
      out << 'w' << m[emit[state].draw(rng)];
    }
    out << '\n';
    written += static_cast<std::size_t>(n);
  }
  if (!out) fail(ErrorCode::kIo, "failed writing synthetic corpus");
  return written;
}

std::size_t generate_corpus(const SynthConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return generate_corpus(config, out);
}

}  // namespace cfme
