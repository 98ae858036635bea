#include <doctest.h>

#include <algorithm>

#include "../support.hpp"
#include "uvqa/errors.hpp"
#include "uvqa/evaluator.hpp"
#include "uvqa/synthetic.hpp"

using namespace uvqa;
using namespace uvqa::test;

namespace {

std::vector<std::string> with_count(const std::string& pred, std::size_t count) {
  std::vector<std::string> a(10, "other");
  std::fill_n(a.begin(), count, pred);
  return a;
}

QARecord t3(const std::string& id, const std::string& answer, Source s = Source::synthetic) {
  return record(id, s, "what is the left token", ten(answer));
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("vqa_accuracy examples") {
  CHECK(vqa_accuracy("stop", with_count("stop", 5)) == 1.0);
  CHECK(vqa_accuracy("stop", with_count("stop", 2)) == 2.0 / 3.0);
  CHECK(vqa_accuracy("stop", with_count("stop", 0)) == 0.0);
  CHECK(vqa_accuracy(" STOP. ", with_count("stop", 1)) == 1.0 / 3.0);
}

TEST_CASE("vqa_accuracy takes exactly the values 0, 1/3, 2/3, 1") {
  for (std::size_t c = 0; c <= 10; ++c) {
    const double v = vqa_accuracy("x", with_count("x", c));
    CHECK(v == std::min(static_cast<double>(c) / 3.0, 1.0));
    CHECK((v == 0.0 || v == 1.0 / 3.0 || v == 2.0 / 3.0 || v == 1.0));
  }
}

TEST_CASE("vqa_accuracy is invariant under answer permutations") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> a;
    for (int i = 0; i < 10; ++i) a.push_back(rng.below(2) ? "yes" : "no");
    const double base = vqa_accuracy("yes", a);
    for (std::size_t i = a.size(); i > 1; --i) std::swap(a[i - 1], a[rng.below(i)]);
    CHECK(vqa_accuracy("yes", a) == base);
  }
}

TEST_CASE("leave-one-out variant averages ten 9-answer subsets") {
  // 3 matches: 3 subsets drop a match (2/3), 7 keep all three (1).
  CHECK(vqa_accuracy("x", with_count("x", 3), AccuracyVariant::leave_one_out) ==
        doctest::Approx((3 * (2.0 / 3.0) + 7 * 1.0) / 10.0).epsilon(1e-15));
  CHECK(vqa_accuracy("x", with_count("x", 10), AccuracyVariant::leave_one_out) == 1.0);
  CHECK(vqa_accuracy("x", with_count("x", 0), AccuracyVariant::leave_one_out) == 0.0);
}

TEST_CASE("score_predictions aggregates by source and template") {
  const std::vector<QARecord> rs{t3("b", "exit", Source::textvqa), t3("a", "bank", Source::vqa),
                                 record("c", Source::vqa, "how many stars are there", ten("two"))};
  const AccuracyReport all = score_predictions(rs, {"exit", "bank", "two"});
  CHECK(all.overall == 1.0);
  CHECK(all.n == 3);

  const AccuracyReport half = score_predictions({rs[0], rs[1]}, {"exit", "wrong"});
  CHECK(half.overall == 0.5);
  CHECK(half.by_source.at("textvqa").accuracy == 1.0);
  CHECK(half.by_source.at("vqa").accuracy == 0.0);
  CHECK(half.by_template.at("T3").n == 2);

  const AccuracyReport mixed = score_predictions(rs, {"exit", "nope", "two"});
  double weighted = 0.0;
  for (const auto& [k, c] : mixed.by_source) weighted += c.accuracy * static_cast<double>(c.n);
  CHECK(std::abs(weighted / static_cast<double>(mixed.n) - mixed.overall) < 1e-12);
  CHECK(mixed.by_template.at("T1").accuracy == 1.0);
}

TEST_CASE("score_predictions is independent of input order") {
  SynthConfig cfg;
  cfg.scenes = 40;
  auto rs = generate_synthetic(cfg, 1).records;
  std::vector<std::string> preds;
  Rng rng(2);
  for (const auto& r : rs) preds.push_back(rng.below(2) ? r.answers[0] : "nope");
  const AccuracyReport a = score_predictions(rs, preds);
  std::reverse(rs.begin(), rs.end());
  std::reverse(preds.begin(), preds.end());
  CHECK(score_predictions(rs, preds) == a);
}

TEST_CASE("empty or mismatched inputs are validation errors") {
  CHECK_THROWS_AS(score_predictions({}, {}), ValidationError);
  CHECK_THROWS_AS(score_predictions({t3("a", "x")}, {}), ValidationError);
}

TEST_CASE("reports render to two decimals and a machine-readable form") {
  const AccuracyReport rep = score_predictions({t3("a", "x"), t3("b", "y"), t3("c", "z")}, {"x", "y", "no"});
  const std::string human = render_report(rep);
  CHECK(human.find("overall\t3\t66.67") != std::string::npos);
  CHECK(human.find("template:T3\t3\t66.67") != std::string::npos);
  const std::string machine = render_report_machine(rep);
  CHECK(machine.find("cell=overall n=3 accuracy=0.66666666666666663") != std::string::npos);
}

TEST_CASE("probe: a constant 'stop' predictor on a balanced 4-answer set") {
  std::vector<QARecord> probe;
  const std::vector<std::string> answers{"bank", "cafe", "exit", "stop"};
  for (std::size_t i = 0; i < 8; ++i) probe.push_back(t3("p" + std::to_string(i), answers[i % 4]));
  const BiasProbeReport rep = probe_bias_predictions("T3", probe, std::vector<std::string>(8, "stop"));
  CHECK(rep.majority_answer == "stop");
  CHECK(rep.majority_rate == 1.0);
  CHECK(rep.accuracy_on_balanced == 0.25);
  CHECK(rep.n == 8);
}

TEST_CASE("probe: a perfect predictor has majority rate 1 / #answers") {
  std::vector<QARecord> probe;
  std::vector<std::string> preds;
  const std::vector<std::string> answers{"bank", "cafe", "exit", "stop"};
  for (std::size_t i = 0; i < 8; ++i) {
    probe.push_back(t3("p" + std::to_string(i), answers[i % 4]));
    preds.push_back(answers[i % 4]);
  }
  const BiasProbeReport rep = probe_bias_predictions("T3", probe, preds);
  CHECK(rep.majority_rate == 0.25);
  CHECK(rep.accuracy_on_balanced == 1.0);
  CHECK(rep.majority_answer == "bank");  // lexicographic among ties
}

TEST_CASE("probe: an unbalanced set is rejected with its counts") {
  const std::vector<QARecord> probe{t3("a", "bank"), t3("b", "bank"), t3("c", "cafe")};
  CHECK_THROWS_WITH_AS(require_balanced(probe), doctest::Contains("bank=2, cafe=1"), ValidationError);
  CHECK_THROWS_AS(require_balanced({}), ValidationError);
  require_balanced(generate_t3_probe(SynthConfig{}, 1, 2));
}

TEST_CASE("probe_records filters by template") {
  std::vector<QARecord> rs{t3("a", "x"), record("b", Source::vqa, "how many stars are there", ten("one"))};
  CHECK(probe_records(rs, "T3").size() == 1);
  CHECK(probe_records(rs, "T1").size() == 1);
  CHECK(probe_records(rs, "T2").empty());
}

TEST_CASE("question_template recognises the synthetic families") {
  CHECK(question_template(t3("a", "x")) == "T3");
  CHECK(question_template(record("b", Source::vqa, "what does the sign say", ten("x"))) == "T2");
  CHECK(question_template(record("c", Source::vqa, "how many circles are there", ten("x"))) == "T1");
  CHECK(question_template(record("d", Source::textvqa, "Which brand?", ten("x"))) == "which");
}

}  // TEST_SUITE
