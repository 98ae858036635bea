#include "uvqa/stats.hpp"

#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "uvqa/text.hpp"
#include "uvqa/vocabulary.hpp"

namespace uvqa {

namespace {

std::vector<std::pair<std::string, std::size_t>> top(const std::unordered_map<std::string, std::size_t>& counts,
                                                     std::size_t k) {
  auto ranked = ranked_counts(counts);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

void write_table(std::ostringstream& out, const std::string& name,
                 const std::vector<std::pair<std::string, std::size_t>>& rows) {
  out << "# " << name << "\nword\tcount\n";
  for (const auto& [w, c] : rows) out << w << '\t' << c << '\n';
}

}  // namespace

StatsReport compute_stats(const UnionDataset& dataset, std::size_t top_k) {
  StatsReport rep;
  rep.records = dataset.records.size();
  std::unordered_map<std::string, std::size_t> question_words, answer_words, ocr_words;
  for (const auto& r : dataset.records) {
    ++rep.ocr_length_histogram[r.ocr.size()];
    for (auto& w : normalize_words(r.question)) ++question_words[w];
    for (const auto& a : r.answers)
      for (auto& w : normalize_words(a)) ++answer_words[w];
    for (const auto& t : r.ocr)
      for (auto& w : normalize_words(t.text)) ++ocr_words[w];
  }

  const auto counts = count_by_source(dataset.records);
  rep.proportions_defined = rep.records > 0;
  for (const auto& [source, count] : counts) {
    rep.proportions.push_back(
        {source, count, rep.proportions_defined ? static_cast<double>(count) / static_cast<double>(rep.records) : 0.0});
  }
  rep.top_question_words = top(question_words, top_k);
  rep.top_answer_words = top(answer_words, top_k);
  rep.top_ocr_words = top(ocr_words, top_k);
  return rep;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
  return buf;
}

std::string format_percent(std::size_t count, std::size_t total) {
  // Tenths of a percent, rounded half up in integer arithmetic.
  const std::size_t tenths = (count * 2000 + total) / (2 * total);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

std::string render_stats(const StatsReport& rep) {
  std::ostringstream out;
  out << "# summary\n";
  out << "records\t" << rep.records << '\n';
  out << "proportions\t" << (rep.proportions_defined ? "defined" : "undefined (empty dataset)") << '\n';
  out << "# source_proportions\nsource\tcount\tpercent\n";
  for (const auto& s : rep.proportions) {
    out << to_string(s.source) << '\t' << s.count << '\t'
        << (rep.proportions_defined ? format_percent(s.count, rep.records) : std::string("n/a")) << '\n';
  }
  out << "# ocr_length_histogram\nocr_tokens\trecords\n";
  for (const auto& [len, n] : rep.ocr_length_histogram) out << len << '\t' << n << '\n';
  write_table(out, "top_question_words", rep.top_question_words);
  write_table(out, "top_answer_words", rep.top_answer_words);
  write_table(out, "top_ocr_words", rep.top_ocr_words);
  return out.str();
}

}  // namespace uvqa
