#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uvqa/dataset.hpp"

namespace uvqa {

struct SourceShare {
  Source source;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct StatsReport {
  std::size_t records = 0;
  /// OCR-token count per record -> number of records with that count.
  std::map<std::size_t, std::size_t> ocr_length_histogram;
  /// Sources with at least one record, in enum order.
  std::vector<SourceShare> proportions;
  bool proportions_defined = false;
  std::vector<std::pair<std::string, std::size_t>> top_question_words;
  std::vector<std::pair<std::string, std::size_t>> top_answer_words;
  std::vector<std::pair<std::string, std::size_t>> top_ocr_words;
};

StatsReport compute_stats(const UnionDataset& dataset, std::size_t top_k = 100);

/// Percentage with one decimal place, e.g. 0.355 -> "35.5%".
std::string format_percent(double fraction);
/// Exact variant from integer counts; total must be positive.
std::string format_percent(std::size_t count, std::size_t total);

/// Summary block followed by TSV tables, each introduced by a "# name" line.
std::string render_stats(const StatsReport& report);

}  // namespace uvqa
