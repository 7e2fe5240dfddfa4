#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "error.hpp"

namespace cfme {

namespace {

// Accepts well-formed UTF-8 only (no overlongs, surrogates or code points
// above U+10FFFF).
bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len;
    std::uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

// Reads the corpus line by line, validating encoding, and hands each line's
// whitespace-separated tokens to `fn`.
template <typename Fn>
void for_each_line(std::istream& in, const CorpusOptions& options, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> tokens;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!valid_utf8(line)) {
      fail(ErrorCode::kIo,
           "malformed UTF-8 on line " + std::to_string(line_no));
    }
    if (options.lowercase) {
      for (char& ch : line) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
      }
    }
    tokens.clear();
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
      if (pos > start) tokens.emplace_back(line.data() + start, pos - start);
    }
    fn(tokens);
  }
  if (in.bad()) fail(ErrorCode::kIo, "read error after line " + std::to_string(line_no));
}

bool is_reserved(std::string_view w) {
  return w == Vocabulary::kStartToken || w == Vocabulary::kEndToken ||
         w == Vocabulary::kUnknownToken;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

}  // namespace

Vocabulary::Vocabulary() {
  add(std::string(kStartToken));
  add(std::string(kEndToken));
  add(std::string(kUnknownToken));
}

void Vocabulary::add(std::string word) {
  auto id = static_cast<WordId>(words_.size());
  if (!ids_.emplace(word, id).second) {
    fail(ErrorCode::kFormat, "duplicate vocabulary entry '" + word + "'");
  }
  words_.push_back(std::move(word));
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& content_words) {
  Vocabulary v;
  for (const auto& w : content_words) {
    if (w.empty()) fail(ErrorCode::kFormat, "empty vocabulary entry");
    if (is_reserved(w)) {
      fail(ErrorCode::kFormat, "reserved token '" + w + "' listed as content word");
    }
    v.add(w);
  }
  return v;
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

WordId Vocabulary::id(std::string_view word) const {
  return find(word).value_or(kUnknown);
}

const std::string& Vocabulary::word(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    fail(ErrorCode::kInvalidArgument, "word id out of range: " + std::to_string(id));
  }
  return words_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& w : words_) out << w << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  save(out);
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < kReservedCount || lines[0] != kStartToken ||
      lines[1] != kEndToken || lines[2] != kUnknownToken) {
    fail(ErrorCode::kFormat, "vocabulary file must start with <s>, </s>, <unk>");
  }
  lines.erase(lines.begin(), lines.begin() + kReservedCount);
  return from_words(lines);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  return load(in);
}

Vocabulary build_vocabulary(std::istream& corpus, std::size_t max_size,
                            const CorpusOptions& options) {
  if (max_size < 1) fail(ErrorCode::kInvalidArgument, "max_size must be >= 1");
  struct Entry {
    std::int64_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  std::size_t tokens = 0;
  for_each_line(corpus, options, [&](const std::vector<std::string_view>& line) {
    for (auto tok : line) {
      ++tokens;
      if (is_reserved(tok)) continue;
      auto [it, inserted] = counts.try_emplace(std::string(tok));
      if (inserted) {
        it->second.first = order.size();
        order.push_back(it->first);
      }
      ++it->second.count;
    }
  });
  if (tokens == 0) fail(ErrorCode::kInvalidArgument, "empty corpus");

  std::vector<const std::string*> ranked;
  ranked.reserve(order.size());
  for (const auto& w : order) ranked.push_back(&w);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const std::string* a, const std::string* b) {
                     return counts.at(*a).count > counts.at(*b).count;
                   });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> content;
  content.reserve(ranked.size());
  for (const auto* w : ranked) content.push_back(*w);
  return Vocabulary::from_words(content);
}

Vocabulary build_vocabulary(const std::filesystem::path& corpus,
                            std::size_t max_size, const CorpusOptions& options) {
  auto in = open_input(corpus);
  return build_vocabulary(in, max_size, options);
}

std::size_t TokenStream::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

TokenStream tokenize(std::istream& corpus, const Vocabulary& vocab,
                     const CorpusOptions& options) {
  TokenStream stream;
  for_each_line(corpus, options, [&](const std::vector<std::string_view>& line) {
    std::vector<WordId> ids;
    ids.reserve(line.size());
    for (auto tok : line) ids.push_back(vocab.id(tok));
    stream.sentences.push_back(std::move(ids));
  });
  return stream;
}

TokenStream tokenize(const std::filesystem::path& corpus, const Vocabulary& vocab,
                     const CorpusOptions& options) {
  auto in = open_input(corpus);
  return tokenize(in, vocab, options);
}

std::vector<Event> merge_events(std::vector<Event> events) {
  auto key_less = [](const Event& a, const Event& b) {
    if (a.history != b.history) return a.history < b.history;
    return a.target < b.target;
  };
  std::sort(events.begin(), events.end(), key_less);
  std::vector<Event> merged;
  merged.reserve(events.size());
  for (const auto& e : events) {
    if (!merged.empty() && merged.back().history == e.history &&
        merged.back().target == e.target) {
      merged.back().count += e.count;
    } else {
      merged.push_back(e);
    }
  }
  return merged;
}

std::vector<Event> extract_events(const TokenStream& stream, bool merge) {
  std::vector<Event> events;
  events.reserve(stream.token_count());
  for (const auto& sentence : stream.sentences) {
    History h;
    for (WordId w : sentence) {
      events.push_back(Event{h, w, 1});
      h.w2 = h.w1;
      h.w1 = w;
    }
  }
  if (merge) return merge_events(std::move(events));
  return events;
}

std::int64_t total_count(std::span<const Event> events) {
  std::int64_t n = 0;
  for (const auto& e : events) n += e.count;
  return n;
}

TokenStream take_tokens(const TokenStream& stream, std::size_t token_budget) {
  TokenStream out;
  std::size_t n = 0;
  for (const auto& s : stream.sentences) {
    if (n >= token_budget) break;
    out.sentences.push_back(s);
    n += s.size();
  }
  return out;
}

}  // namespace cfme
