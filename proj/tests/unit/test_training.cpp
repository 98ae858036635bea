#include <doctest.h>

#include "../properties.hpp"
#include "uvqa/errors.hpp"

using namespace uvqa;
using namespace uvqa::test;

namespace {

QARecord stop_record() {
  return record("s", Source::textvqa, "what does the sign say", ten("stop"),
                {token("STOP", {0.1, 0.1, 0.4, 0.3}), token("go", {0.5, 0.5, 0.7, 0.6}), token("stop", {0.6, 0.1, 0.9, 0.2})});
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("targets mark the vocab id and every matching OCR position") {
  Model m = tiny_model(1);
  const auto targets = build_targets(stop_record(), m.answers(), m.config().max_steps, 3);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].word == "stop");
  CHECK(targets[0].vocab_positive == std::vector<std::size_t>{*m.answers().lookup("stop")});
  CHECK(targets[0].ocr_positive == std::vector<std::size_t>{0, 2});
  CHECK(targets[0].feed_next == DecoderFeed::ocr(0));
  CHECK(targets[1].vocab_positive == std::vector<std::size_t>{AnswerVocabulary::kEnd});
  const Tensor row = targets[0].as_row(m.config().vocab_size, 3);
  CHECK(row.size() == m.config().vocab_size + 3);
  CHECK(row[*m.answers().lookup("stop")] == 1.0);
  CHECK(row[m.config().vocab_size + 0] == 1.0);
  CHECK(row[m.config().vocab_size + 1] == 0.0);
  CHECK(row[m.config().vocab_size + 2] == 1.0);
}

TEST_CASE("a word in neither vocabulary nor OCR maps to unk") {
  Model m = tiny_model(2);
  QARecord r = stop_record();
  r.answers = ten("banana split");
  const auto targets = build_targets(r, m.answers(), m.config().max_steps, 3);
  REQUIRE(targets.size() == 3);
  CHECK(targets[0].vocab_positive == std::vector<std::size_t>{AnswerVocabulary::kUnknown});
  CHECK(targets[0].ocr_positive.empty());
  CHECK(targets[0].feed_next == DecoderFeed::vocab(AnswerVocabulary::kUnknown));
}

TEST_CASE("long answers are truncated to T - 1 words plus end") {
  Model m = tiny_model(3);
  QARecord r = stop_record();
  r.answers = ten("go go go go go go go");
  const auto targets = build_targets(r, m.answers(), 4, 3);
  CHECK(targets.size() == 4);
  CHECK(targets.back().word == "<end>");
}

TEST_CASE("saturated logits give near-zero loss per step") {
  Tensor labels({2, 5});
  labels(0, 1) = labels(0, 3) = labels(1, 0) = 1.0;
  Tensor logits({2, 5}, -20.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1.0) logits[i] = 20.0;
  Graph g;
  const double loss = g.value(g.bce_with_logits(g.constant(logits), labels))[0];
  CHECK(loss / 2.0 < 1e-6);
  CHECK(loss > 0.0);
}

TEST_CASE("one step at lr 1e-4 strictly decreases the record's loss") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Model m = tiny_model(seed);
    const QARecord r = stop_record();
    const double before = evaluate_loss(r, m);
    AdamW opt;
    const std::vector<const QARecord*> batch{&r};
    const double reported = train_step(batch, m, opt);
    CHECK(reported == doctest::Approx(before).epsilon(1e-12));
    CHECK(evaluate_loss(r, m) < before);
    CHECK(opt.steps_taken() == 1);
  }
}

TEST_CASE("AdamW matches a hand-computed first step") {
  Parameter p("p", Tensor::vector({1.0, -2.0}));
  p.grad = Tensor::vector({0.5, -0.25});
  AdamW opt;
  std::vector<Parameter*> ps{&p};
  opt.step(ps);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * (sign(g) + wd * p).
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-4 * (0.5 / (0.5 + 1e-8) + 0.01 * 1.0)).epsilon(1e-14));
  CHECK(p.value[1] == doctest::Approx(-2.0 - 1e-4 * (-0.25 / (0.25 + 1e-8) + 0.01 * -2.0)).epsilon(1e-14));
}

TEST_CASE("record loss matches a finite-difference gradient") {
  const GradCheckResult rep = full_model_grad_check(7);
  CHECK(rep.max_rel_error < 1e-4);
  CHECK(rep.coordinates > 500);
}

TEST_CASE("training is deterministic and reduces loss on a tiny set") {
  std::vector<QARecord> data{stop_record()};
  QARecord other = stop_record();
  other.id = "g";
  other.question = "what is left";
  other.answers = ten("go");
  data.push_back(other);
  auto run = [&](std::uint64_t seed) {
    Model m = tiny_model(seed);
    TrainOptions opts;
    opts.iterations = 30;
    opts.batch_size = 2;
    opts.optimizer.learning_rate = 1e-2;
    opts.seed = seed;
    opts.log_every = 10;
    std::vector<double> losses;
    train(m, data, opts, [&](const TrainProgress& p) { losses.push_back(p.loss); });
    return std::make_pair(losses, m.store().at("head.w_vocab").value);
  };
  const auto a = run(4), b = run(4);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  REQUIRE(a.first.size() == 3);
  CHECK(a.first.back() < a.first.front());
}

TEST_CASE("training rejects empty input") {
  Model m = tiny_model(1);
  AdamW opt;
  CHECK_THROWS_AS(train_step(std::vector<const QARecord*>{}, m, opt), ValidationError);
  CHECK_THROWS_AS(train(m, {}, TrainOptions{}), ValidationError);
}

}  // TEST_SUITE
