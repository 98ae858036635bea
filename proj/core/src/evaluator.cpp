#include "uvqa/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "uvqa/errors.hpp"
#include "uvqa/fusion.hpp"
#include "uvqa/synthetic.hpp"
#include "uvqa/training.hpp"

namespace uvqa {

namespace {

double min_over_three(std::size_t matches) { return std::min(static_cast<double>(matches) / 3.0, 1.0); }

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Sum {
  std::size_t n = 0;
  double total = 0.0;
};

}  // namespace

double vqa_accuracy(const std::string& pred, const std::vector<std::string>& answers, AccuracyVariant variant) {
  const std::string p = normalize_answer(pred);
  std::vector<bool> match;
  for (const auto& a : answers) match.push_back(normalize_answer(a) == p);
  const auto matches = static_cast<std::size_t>(std::count(match.begin(), match.end(), true));
  if (variant == AccuracyVariant::min_over_three || answers.size() < 2) return min_over_three(matches);
  double total = 0.0;
  for (bool left_out : match) total += min_over_three(matches - (left_out ? 1 : 0));
  return total / static_cast<double>(answers.size());
}

bool AccuracyReport::operator==(const AccuracyReport& o) const {
  auto same = [](const std::map<std::string, AccuracyCell>& a, const std::map<std::string, AccuracyCell>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
             return x.first == y.first && x.second.n == y.second.n && x.second.accuracy == y.second.accuracy;
           });
  };
  return overall == o.overall && n == o.n && same(by_source, o.by_source) && same(by_template, o.by_template);
}

AccuracyReport score_predictions(const std::vector<QARecord>& records, const std::vector<std::string>& predictions,
                                 AccuracyVariant variant) {
  if (records.empty()) throw ValidationError("evaluate: empty split");
  if (records.size() != predictions.size()) {
    throw ValidationError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(records.size()) + " records");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return records[a].id < records[b].id; });

  Sum all;
  std::map<std::string, Sum> sources, templates;
  for (auto i : order) {
    const double s = vqa_accuracy(predictions[i], records[i].answers, variant);
    for (Sum* cell : {&all, &sources[std::string(to_string(records[i].source))],
                      &templates[question_template(records[i])]}) {
      ++cell->n;
      cell->total += s;
    }
  }
  AccuracyReport rep;
  rep.n = all.n;
  rep.overall = all.total / static_cast<double>(all.n);
  for (const auto& [k, s] : sources) rep.by_source[k] = {s.n, s.total / static_cast<double>(s.n)};
  for (const auto& [k, s] : templates) rep.by_template[k] = {s.n, s.total / static_cast<double>(s.n)};
  return rep;
}

std::vector<std::string> predict(Model& model, const std::vector<QARecord>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(decode_greedy(r, model).text);
  return out;
}

AccuracyReport evaluate(Model& model, const std::vector<QARecord>& records, AccuracyVariant variant) {
  if (records.empty()) throw ValidationError("evaluate: empty split");
  return score_predictions(records, predict(model, records), variant);
}

std::string render_report(const AccuracyReport& rep) {
  std::ostringstream out;
  out << "cell\tn\taccuracy\n";
  out << "overall\t" << rep.n << '\t' << fixed(rep.overall * 100.0, 2) << '\n';
  for (const auto& [k, c] : rep.by_source) out << "source:" << k << '\t' << c.n << '\t' << fixed(c.accuracy * 100.0, 2) << '\n';
  for (const auto& [k, c] : rep.by_template)
    out << "template:" << k << '\t' << c.n << '\t' << fixed(c.accuracy * 100.0, 2) << '\n';
  return out.str();
}

std::string render_report_machine(const AccuracyReport& rep) {
  std::ostringstream out;
  out << "cell=overall n=" << rep.n << " accuracy=" << full(rep.overall) << '\n';
  for (const auto& [k, c] : rep.by_source) out << "cell=source:" << k << " n=" << c.n << " accuracy=" << full(c.accuracy) << '\n';
  for (const auto& [k, c] : rep.by_template)
    out << "cell=template:" << k << " n=" << c.n << " accuracy=" << full(c.accuracy) << '\n';
  return out.str();
}

void require_balanced(const std::vector<QARecord>& probe) {
  if (probe.empty()) throw ValidationError("probe set is empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : probe) ++counts[select_target_answer(r.answers)];
  const std::size_t first = counts.begin()->second;
  const bool balanced = std::all_of(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second == first; });
  if (!balanced) {
    std::string listing;
    for (const auto& [a, c] : counts) listing += (listing.empty() ? "" : ", ") + a + "=" + std::to_string(c);
    throw ValidationError("probe set is not balanced: " + listing);
  }
}

std::vector<QARecord> probe_records(const std::vector<QARecord>& probe, const std::string& template_id) {
  std::vector<QARecord> out;
  std::copy_if(probe.begin(), probe.end(), std::back_inserter(out),
               [&](const QARecord& r) { return question_template(r) == template_id; });
  return out;
}

BiasProbeReport probe_bias_predictions(const std::string& template_id, const std::vector<QARecord>& probe,
                                       const std::vector<std::string>& predictions) {
  require_balanced(probe);
  if (predictions.size() != probe.size()) throw ValidationError("probe: prediction count does not match probe set");
  BiasProbeReport rep;
  rep.template_id = template_id;
  rep.n = probe.size();
  for (const auto& p : predictions) ++rep.prediction_counts[normalize_answer(p)];
  std::size_t best = 0;
  for (const auto& [a, c] : rep.prediction_counts) {
    if (c > best) {
      best = c;
      rep.majority_answer = a;
    }
  }
  rep.majority_rate = static_cast<double>(best) / static_cast<double>(rep.n);
  rep.accuracy_on_balanced = score_predictions(probe, predictions).overall;
  return rep;
}

BiasProbeReport probe_bias(Model& model, const std::string& template_id, const std::vector<QARecord>& probe) {
  const auto records = probe_records(probe, template_id);
  if (records.empty()) throw ValidationError("probe: no records with template " + template_id);
  return probe_bias_predictions(template_id, records, predict(model, records));
}

std::string render_probe(const BiasProbeReport& rep) {
  std::ostringstream out;
  out << "template\t" << rep.template_id << '\n';
  out << "n\t" << rep.n << '\n';
  out << "majority_answer\t" << rep.majority_answer << '\n';
  out << "majority_rate\t" << fixed(rep.majority_rate * 100.0, 2) << '\n';
  out << "accuracy_on_balanced\t" << fixed(rep.accuracy_on_balanced * 100.0, 2) << '\n';
  out << "# predictions\nanswer\tcount\n";
  for (const auto& [a, c] : rep.prediction_counts) out << a << '\t' << c << '\n';
  return out.str();
}

}  // namespace uvqa
