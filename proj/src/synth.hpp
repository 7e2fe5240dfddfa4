#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace cfme {

// Synthetic text from a latent class chain: each sentence walks a first-order
// Markov chain over classes (every class has a few likely successors) and
// emits a word from the current class. Words are named w<rank>; ranks are
// dealt round-robin into classes and drawn within a class with Zipf weights.
struct SynthConfig {
  std::size_t tokens = 50000;
  int vocab_size = 2000;
  int classes = 40;
  int successors = 6;      // successor classes per class
  double zipf = 1.0;       // within-class exponent; 0 gives uniform classes
  int min_length = 4;
  int max_length = 20;
  std::uint64_t seed = 1;
};

// Writes whole sentences until at least `tokens` tokens are out. Returns the
// token count written.
std::size_t generate_corpus(const SynthConfig& config, std::ostream& out);
std::size_t generate_corpus(const SynthConfig& config, const std::filesystem::path& path);

}  // namespace cfme
