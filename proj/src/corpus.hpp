#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cfme {

using WordId = std::int32_t;

// Bidirectional word <-> id map. Ids 0, 1, 2 are reserved for the sentence
// start, sentence end and unknown tokens; content words follow in descending
// training-count order.
class Vocabulary {
 public:
  static constexpr WordId kSentenceStart = 0;
  static constexpr WordId kSentenceEnd = 1;
  static constexpr WordId kUnknown = 2;
  static constexpr std::string_view kStartToken = "<s>";
  static constexpr std::string_view kEndToken = "</s>";
  static constexpr std::string_view kUnknownToken = "<unk>";
  static constexpr std::size_t kReservedCount = 3;

  Vocabulary();

  // Content words in id order. Reserved spellings and duplicates are rejected.
  static Vocabulary from_words(const std::vector<std::string>& content_words);

  std::size_t size() const { return words_.size(); }
  std::size_t content_size() const { return words_.size() - kReservedCount; }

  // Predicted words are the unknown token plus every content word; the two
  // boundary tokens are never targets.
  WordId first_output() const { return kUnknown; }
  std::size_t output_count() const { return words_.size() - 2; }
  bool is_output(WordId id) const {
    return id >= kUnknown && static_cast<std::size_t>(id) < words_.size();
  }

  std::optional<WordId> find(std::string_view word) const;
  // Out-of-vocabulary words map to kUnknown.
  WordId id(std::string_view word) const;
  const std::string& word(WordId id) const;
  const std::vector<std::string>& words() const { return words_; }

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  void add(std::string word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
};

struct CorpusOptions {
  bool lowercase = false;
};

// Keeps the max_size most frequent tokens (ties by first occurrence) on top of
// the reserved ones.
Vocabulary build_vocabulary(std::istream& corpus, std::size_t max_size,
                            const CorpusOptions& options = {});
Vocabulary build_vocabulary(const std::filesystem::path& corpus,
                            std::size_t max_size,
                            const CorpusOptions& options = {});

// One sentence per input line. Boundary tokens are implicit and not stored.
struct TokenStream {
  std::vector<std::vector<WordId>> sentences;

  std::size_t token_count() const;
};

TokenStream tokenize(std::istream& corpus, const Vocabulary& vocab,
                     const CorpusOptions& options = {});
TokenStream tokenize(const std::filesystem::path& corpus,
                     const Vocabulary& vocab,
                     const CorpusOptions& options = {});

// Two-word history (w_{i-2}, w_{i-1}); padded with the sentence-start id.
struct History {
  WordId w2 = Vocabulary::kSentenceStart;
  WordId w1 = Vocabulary::kSentenceStart;

  auto operator<=>(const History&) const = default;
};

// A training event. The target is a word id for word-level problems and a
// class id for the class-prediction problems of a factored model.
struct Event {
  History history;
  std::int32_t target = 0;
  std::int64_t count = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

// One event per token position. With merge=true, identical (history, target)
// pairs are collapsed and the result is sorted by (history, target); otherwise
// events come out in corpus order with unit counts.
std::vector<Event> extract_events(const TokenStream& stream, bool merge = true);

// Collapses duplicates of an arbitrary event list into sorted order.
std::vector<Event> merge_events(std::vector<Event> events);

std::int64_t total_count(std::span<const Event> events);

// Returns the first `token_budget` tokens' worth of whole sentences.
TokenStream take_tokens(const TokenStream& stream, std::size_t token_budget);

}  // namespace cfme
