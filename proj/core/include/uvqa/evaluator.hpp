#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "uvqa/dataset.hpp"
#include "uvqa/model.hpp"
#include "uvqa/text.hpp"

namespace uvqa {

enum class AccuracyVariant {
  /// min(#matching references / 3, 1)
  min_over_three,
  /// Mean of min(#matches / 3, 1) over the ten leave-one-out subsets of nine
  /// references (the official VQA evaluation script).
  leave_one_out,
};

/// Both pred and references are normalized with normalize_answer first.
double vqa_accuracy(const std::string& pred, const std::vector<std::string>& answers,
                    AccuracyVariant variant = AccuracyVariant::min_over_three);

struct AccuracyCell {
  std::size_t n = 0;
  double accuracy = 0.0;
};

struct AccuracyReport {
  double overall = 0.0;
  std::size_t n = 0;
  std::map<std::string, AccuracyCell> by_source;
  std::map<std::string, AccuracyCell> by_template;

  bool operator==(const AccuracyReport& other) const;
};

/// Aggregates per-record scores in record-id order. predictions[i] answers
/// records[i]. Throws ValidationError for an empty set or a size mismatch.
AccuracyReport score_predictions(const std::vector<QARecord>& records, const std::vector<std::string>& predictions,
                                 AccuracyVariant variant = AccuracyVariant::min_over_three);

/// Greedy answers for every record, in input order.
std::vector<std::string> predict(Model& model, const std::vector<QARecord>& records);

/// Greedy-decodes and scores every record.
AccuracyReport evaluate(Model& model, const std::vector<QARecord>& records,
                        AccuracyVariant variant = AccuracyVariant::min_over_three);

/// Human table: cell, n, accuracy ×100 with two decimals.
std::string render_report(const AccuracyReport& report);
/// Line-oriented variant: "cell=<name> n=<n> accuracy=<%.17g>".
std::string render_report_machine(const AccuracyReport& report);

struct BiasProbeReport {
  std::string template_id;
  std::string majority_answer;
  double majority_rate = 0.0;
  double accuracy_on_balanced = 0.0;
  std::size_t n = 0;
  std::map<std::string, std::size_t> prediction_counts;
};

/// Throws ValidationError listing per-answer counts unless every ground-truth
/// answer occurs equally often.
void require_balanced(const std::vector<QARecord>& probe);

/// Records of `probe` whose template matches `template_id`.
std::vector<QARecord> probe_records(const std::vector<QARecord>& probe, const std::string& template_id);

BiasProbeReport probe_bias_predictions(const std::string& template_id, const std::vector<QARecord>& probe,
                                       const std::vector<std::string>& predictions);

BiasProbeReport probe_bias(Model& model, const std::string& template_id, const std::vector<QARecord>& probe);

std::string render_probe(const BiasProbeReport& report);

}  // namespace uvqa
