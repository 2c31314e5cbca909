#pragma once

// Whitespace + punctuation tokenizer and frequency-ranked vocabulary.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seover/corpus.hpp"
#include "seover/errors.hpp"

namespace seover {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kNumReserved = 3;
inline constexpr std::size_t kDefaultMaxLen = 64;

inline bool is_detached_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case '\'': case ';': case ':':
      return true;
    default:
      return false;
  }
}

/// Lowercases, splits on whitespace and detaches each of .,!?';: as its own token.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (is_detached_punct(ch)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  Vocabulary() : tokens_{"[PAD]", "[UNK]", "[CLS]"} {}

  /// Content tokens in id order (ids start at 3).
  explicit Vocabulary(const std::vector<std::string>& content) : Vocabulary() {
    for (const auto& t : content) {
      if (t.empty()) throw DataError("vocabulary: empty token");
      if (!index_.emplace(t, tokens_.size()).second) throw DataError("vocabulary: duplicate token '" + t + "'");
      tokens_.push_back(t);
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  std::vector<std::string> content_tokens() const { return {tokens_.begin() + kNumReserved, tokens_.end()}; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Keeps tokens seen at least `min_frequency` times, most frequent first with
/// lexicographic tie-break, capped at `max_size` ids including the reserved ones.
inline Vocabulary build_vocabulary(const DialogueCorpus& corpus, std::size_t min_frequency, std::size_t max_size) {
  if (corpus.num_utterances() == 0) throw DataError("build_vocabulary: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : corpus.dialogues())
    for (const auto& u : d.turns)
      for (auto& t : split_tokens(u.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts)
    if (n >= min_frequency) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = max_size > kNumReserved ? std::min(ranked.size(), max_size - kNumReserved) : 0;
  std::vector<std::string> content;
  content.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) content.push_back(ranked[i].first);
  return Vocabulary(content);
}

inline void write_vocabulary(std::ostream& out, const Vocabulary& v) {
  for (const auto& t : v.content_tokens()) out << t << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in) {
  std::vector<std::string> content;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    content.push_back(line);
  }
  return Vocabulary(content);
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary '" + path + "'");
  return read_vocabulary(in);
}

struct TokenSequence {
  std::vector<std::size_t> ids;  // may carry trailing PAD beyond `length`
  std::size_t length = 0;
  std::string source_text;
  bool truncated = false;
};

inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen) {
  if (max_len == 0) throw ConfigError("tokenize: max_len must be positive");
  TokenSequence seq;
  seq.source_text = std::string(text);
  seq.ids.push_back(kClsId);
  for (const auto& t : split_tokens(text)) {
    if (seq.ids.size() == max_len) {
      seq.truncated = true;
      break;
    }
    seq.ids.push_back(vocab.id_of(t));
  }
  seq.length = seq.ids.size();
  return seq;
}

/// Appends PAD ids up to `len` without changing the true length.
inline TokenSequence pad_to(TokenSequence seq, std::size_t len) {
  while (seq.ids.size() < len) seq.ids.push_back(kPadId);
  return seq;
}

/// Tokenizes every turn of a dialogue; reports truncation once per call site
/// through `truncation_count`.
inline std::vector<TokenSequence> tokenize_dialogue(const Dialogue& d, const Vocabulary& vocab, std::size_t max_len,
                                                    std::size_t* truncation_count = nullptr) {
  std::vector<TokenSequence> out;
  out.reserve(d.turns.size());
  for (const auto& u : d.turns) {
    out.push_back(tokenize(u.text, vocab, max_len));
    if (out.back().truncated && truncation_count) ++*truncation_count;
  }
  return out;
}

inline std::vector<std::vector<TokenSequence>> tokenize_corpus(const DialogueCorpus& corpus, const Vocabulary& vocab,
                                                               std::size_t max_len) {
  std::vector<std::vector<TokenSequence>> out;
  std::size_t truncated = 0;
  for (const auto& d : corpus.dialogues()) out.push_back(tokenize_dialogue(d, vocab, max_len, &truncated));
  if (truncated > 0) {
    std::clog << "seover: " << truncated << " utterance(s) truncated to " << max_len << " tokens\n";
  }
  return out;
}

}  // namespace seover
