#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uvqa/dataset.hpp"

namespace uvqa {

/// Answer vocabulary with begin/end/unknown specials at indices 0, 1, 2.
class AnswerVocabulary {
 public:
  static constexpr std::size_t kBegin = 0;
  static constexpr std::size_t kEnd = 1;
  static constexpr std::size_t kUnknown = 2;
  static constexpr std::size_t kSpecials = 3;

  AnswerVocabulary();
  /// Specials followed by the given words; throws ValidationError on duplicates.
  explicit AnswerVocabulary(const std::vector<std::string>& words);

  /// Most frequent whitespace-split words of the normalized reference answers,
  /// ties broken lexicographically, until max_size entries (specials included).
  static AnswerVocabulary build(const UnionDataset& dataset, std::size_t max_size);
  static AnswerVocabulary build(const std::vector<QARecord>& records, std::size_t max_size);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<std::size_t> lookup(std::string_view word) const;
  /// Words after the specials, in index order.
  std::vector<std::string> words() const { return {tokens_.begin() + kSpecials, tokens_.end()}; }

  bool operator==(const AnswerVocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Question-word vocabulary; index 0 is the shared unknown row.
class WordVocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;

  WordVocabulary();
  explicit WordVocabulary(const std::vector<std::string>& words);
  static WordVocabulary build(const std::vector<QARecord>& records, std::size_t max_size);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::vector<std::string> words() const { return {tokens_.begin() + 1, tokens_.end()}; }
  std::size_t index_of(std::string_view word) const;

  bool operator==(const WordVocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Frequency table sorted by descending count, then ascending word.
std::vector<std::pair<std::string, std::size_t>> ranked_counts(const std::unordered_map<std::string, std::size_t>& counts);

}  // namespace uvqa
