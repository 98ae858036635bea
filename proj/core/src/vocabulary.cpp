#include "uvqa/vocabulary.hpp"

#include <algorithm>

#include "uvqa/errors.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

namespace {

const std::vector<std::string> kAnswerSpecials = {"<begin>", "<end>", "<unk>"};

}  // namespace

std::vector<std::pair<std::string, std::size_t>> ranked_counts(const std::unordered_map<std::string, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

AnswerVocabulary::AnswerVocabulary() : AnswerVocabulary(std::vector<std::string>{}) {}

AnswerVocabulary::AnswerVocabulary(const std::vector<std::string>& words) : tokens_(kAnswerSpecials) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  for (const auto& w : words) {
    if (!index_.emplace(w, tokens_.size()).second) throw ValidationError("duplicate vocabulary entry '" + w + "'");
    tokens_.push_back(w);
  }
}

AnswerVocabulary AnswerVocabulary::build(const UnionDataset& dataset, std::size_t max_size) {
  return build(dataset.records, max_size);
}

AnswerVocabulary AnswerVocabulary::build(const std::vector<QARecord>& records, std::size_t max_size) {
  if (max_size < kSpecials) throw ValidationError("answer vocabulary max_size must be at least 3");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : records)
    for (const auto& a : r.answers)
      for (auto& w : split_whitespace(normalize_answer(a))) ++counts[w];
  std::vector<std::string> words;
  for (auto& [w, c] : ranked_counts(counts)) {
    if (words.size() + kSpecials >= max_size) break;
    if (std::find(kAnswerSpecials.begin(), kAnswerSpecials.end(), w) != kAnswerSpecials.end()) continue;
    words.push_back(w);
  }
  return AnswerVocabulary(words);
}

std::optional<std::size_t> AnswerVocabulary::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordVocabulary::WordVocabulary() : WordVocabulary(std::vector<std::string>{}) {}

WordVocabulary::WordVocabulary(const std::vector<std::string>& words) : tokens_{"<unk>"} {
  index_.emplace(tokens_[0], 0);
  for (const auto& w : words) {
    if (!index_.emplace(w, tokens_.size()).second) throw ValidationError("duplicate question word '" + w + "'");
    tokens_.push_back(w);
  }
}

WordVocabulary WordVocabulary::build(const std::vector<QARecord>& records, std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : records)
    for (auto& w : normalize_words(r.question)) ++counts[w];
  std::vector<std::string> words;
  for (auto& [w, c] : ranked_counts(counts)) {
    if (words.size() + 1 >= max_size) break;
    if (w == "<unk>") continue;
    words.push_back(w);
  }
  return WordVocabulary(words);
}

std::size_t WordVocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnknown : it->second;
}

}  // namespace uvqa
