#include <doctest.h>

#include "../properties.hpp"
#include "uvqa/errors.hpp"
#include "uvqa/synthetic.hpp"

using namespace uvqa;
using namespace uvqa::test;

namespace {

QARecord sign_record() {
  return record("sign", Source::synthetic, "what does the sign say", ten("exit"),
                {token("bank", {0.0, 0.0, 0.3, 0.3}, std::vector<double>{0.0, 0.2, 0.1}),
                 token("exit", {0.5, 0.5, 0.8, 0.8}, std::vector<double>{1.0, -0.1, 0.0}),
                 token("cafe", {0.1, 0.6, 0.2, 0.9}, std::vector<double>{0.0, 0.0, 0.3})});
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("a single entity attends to itself with weight one") {
  Model m = tiny_model(1, tiny_config(8, 2, 2));
  Graph g(Graph::Mode::inference);
  Rng rng(1);
  const EncoderPass enc = encode(g, m, g.constant(Tensor::uniform({1, 8}, rng, -1, 1)));
  REQUIRE(enc.attention.size() == 2);
  for (const auto& layer : enc.attention)
    for (Var a : layer) CHECK(g.value(a) == Tensor::matrix({{1.0}}));
}

TEST_CASE("encoder attention rows sum to one on random 9-entity input") {
  Model m = tiny_model(2, tiny_config(8, 2, 4));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    EntitySequence s;
    s.matrix = Tensor::uniform({9, 8}, rng, -2, 2);
    CHECK(stochastic_error(encode_sequence(m, s).attention) < 1e-9);
  }
}

TEST_CASE("with zero layers the encoder is the identity") {
  Model m = tiny_model(3);
  m.set_layers_for_testing(0);
  Rng rng(2);
  EntitySequence s;
  s.matrix = Tensor::uniform({5, 8}, rng, -1, 1);
  const EncodedEntities out = encode_sequence(m, s);
  CHECK(out.states == s.matrix);
  CHECK(out.attention.empty());
}

TEST_CASE("encoder is equivariant to object permutations") {
  Model m = tiny_model(4, tiny_config(8, 2, 2));
  Rng rng(6);
  const QARecord r = random_record(rng, "p", 4, {"exit", "bank"}, "what is the sign", "exit");
  QARecord perm = r;
  const std::vector<std::size_t> order{2, 0, 3, 1};
  for (std::size_t j = 0; j < 4; ++j) perm.objects[j] = r.objects[order[j]];
  const EncodedEntities a = encode_sequence(m, embed_record_sequence(r, m));
  const EncodedEntities b = encode_sequence(m, embed_record_sequence(perm, m));
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(b.states(j, k) - a.states(order[j], k)) < 1e-9);
  for (std::size_t i = 4; i < a.states.rows(); ++i)
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(b.states(i, k) - a.states(i, k)) < 1e-9);
}

TEST_CASE("pointer scores: orthogonal query gives zeros, duplicate rows tie") {
  Model m = tiny_model(5);
  auto& f = m.fusion();
  for (Parameter* p : {f.w_ptr_query, f.w_ptr_key, f.b_ptr_query, f.b_ptr_key}) p->value.fill(0.0);
  for (std::size_t k = 0; k < 8; ++k) f.w_ptr_query->value(k, k) = f.w_ptr_key->value(k, k) = 1.0;
  Graph g;
  Tensor z({1, 8}), s({3, 8});
  z(0, 0) = 1.0;
  s(0, 1) = 2.0;
  s(1, 5) = -3.0;
  s(2, 7) = 0.5;
  const Tensor zero = g.value(pointer_scores(g, f, g.constant(z), g.constant(s)));
  for (double v : zero.values()) CHECK(v == 0.0);

  Rng rng(3);
  for (auto* p : {f.w_ptr_query, f.w_ptr_key, f.b_ptr_query, f.b_ptr_key})
    for (auto& v : p->value.values()) v = rng.uniform(-1, 1);
  Tensor dup = Tensor::uniform({3, 8}, rng, -1, 1);
  std::copy(dup.row(0).begin(), dup.row(0).end(), dup.row(2).begin());
  const Tensor sc = g.value(pointer_scores(g, f, g.constant(Tensor::uniform({2, 8}, rng, -1, 1)), g.constant(dup)));
  CHECK(sc(0, 0) == sc(0, 2));
  CHECK(sc(1, 0) == sc(1, 2));
  CHECK_THROWS_AS(pointer_scores(g, f, g.constant(Tensor({1, 8})), g.constant(Tensor({2, 4}))), DimensionError);
}

TEST_CASE("pointer scores follow the scaled bilinear form and pass grad_check") {
  Model m = tiny_model(6);
  auto& f = m.fusion();
  Rng rng(8);
  for (auto* p : {f.b_ptr_query, f.b_ptr_key})
    for (auto& v : p->value.values()) v = rng.uniform(-0.5, 0.5);
  Parameter z("z", Tensor::uniform({2, 8}, rng, -1, 1)), s("s", Tensor::uniform({3, 8}, rng, -1, 1));
  Graph g;
  const Tensor sc = g.value(pointer_scores(g, f, g.param(z), g.param(s)));
  // Direct evaluation.
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < 3; ++i) {
      double dot = 0.0;
      for (std::size_t a = 0; a < 8; ++a) {
        double q = f.b_ptr_query->value[a], k = f.b_ptr_key->value[a];
        for (std::size_t b = 0; b < 8; ++b) {
          q += z.value(t, b) * f.w_ptr_query->value(b, a);
          k += s.value(i, b) * f.w_ptr_key->value(b, a);
        }
        dot += q * k;
      }
      CHECK(sc(t, i) == doctest::Approx(dot / std::sqrt(8.0)).epsilon(1e-12));
    }
  std::vector<Parameter*> ps{&z, &s, f.w_ptr_query, f.w_ptr_key, f.b_ptr_query, f.b_ptr_key};
  Tensor weights = Tensor::uniform({2, 3}, rng, -1, 1);
  CHECK(grad_check([&](Graph& gg) { return gg.sum(gg.mul(pointer_scores(gg, f, gg.param(z), gg.param(s)), gg.constant(weights))); },
                   ps) < 1e-4);
}

TEST_CASE("rigged pointer copies the dominant OCR token, then ends") {
  Model m = tiny_model(7);
  rig_copy_then_end(m);
  const QARecord r = sign_record();
  const DecodedAnswer ans = decode_greedy(r, m);
  REQUIRE(ans.steps.size() == 2);
  CHECK(ans.steps[0].kind == StepChoice::Kind::ocr);
  CHECK(ans.steps[0].index == 1);
  CHECK(ans.steps[1].index == AnswerVocabulary::kEnd);
  CHECK(ans.text == "exit");
}

TEST_CASE("an end token that dominates at step 0 yields an empty answer") {
  Model m = tiny_model(8);
  m.fusion().b_vocab->value[AnswerVocabulary::kEnd] = 1e6;
  const DecodedAnswer ans = decode_greedy(sign_record(), m);
  CHECK(ans.steps.size() == 1);
  CHECK(ans.text.empty());
}

TEST_CASE("decoding stops after exactly T steps without an end token") {
  ModelConfig cfg = tiny_config();
  cfg.max_steps = 12;
  Model m = tiny_model(9, cfg);
  m.fusion().b_vocab->value[AnswerVocabulary::kEnd] = -1e6;
  const QARecord r = sign_record();
  const DecodedAnswer ans = decode_greedy(r, m);
  CHECK(ans.steps.size() == 12);
  for (const auto& s : ans.steps) CHECK_FALSE((s.kind == StepChoice::Kind::vocab && s.index == AnswerVocabulary::kEnd));
}

TEST_CASE("greedy ties resolve to the lowest index, vocabulary first") {
  Model m = tiny_model(10);
  m.set_layers_for_testing(0);
  auto& f = m.fusion();
  for (auto* p : {f.w_vocab, f.b_vocab, f.w_ptr_query, f.b_ptr_query, f.w_ptr_key, f.b_ptr_key}) p->value.fill(0.0);
  f.b_vocab->value[AnswerVocabulary::kEnd] = -1.0;
  // All remaining scores are 0: the first vocab entry (begin) wins every step.
  const DecodedAnswer ans = decode_greedy(sign_record(), m);
  for (const auto& s : ans.steps) {
    CHECK(s.kind == StepChoice::Kind::vocab);
    CHECK(s.index == 0);
  }
}

TEST_CASE("decoder steps are causal") {
  Model m = tiny_model(11, tiny_config(8, 2, 2));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const QARecord r = random_record(rng, "c", 2, {"exit", "bank", "go"}, "what is the sign", "go");
    CHECK(causality_violation(r, m, rng, 4) == 0.0);
  }
}

TEST_CASE("decoded attention is row-stochastic and entities ignore decoder rows") {
  Model m = tiny_model(12, tiny_config(8, 2, 2));
  Rng rng(4);
  const QARecord r = random_record(rng, "a", 3, {"exit", "bank"}, "what is", "exit");
  const DecodedAnswer ans = decode_greedy(r, m);
  CHECK(ans.entities() == 3 + 2 + 2);
  REQUIRE(ans.attention.size() == 2);
  REQUIRE(ans.attention[0].size() == 2);
  CHECK(stochastic_error(ans.attention) < 1e-9);
  const Tensor& a = ans.attention[1][1];
  CHECK(a.rows() == ans.entities() + ans.steps.size());
  for (std::size_t i = 0; i < ans.entities(); ++i)
    for (std::size_t j = ans.entities(); j < a.cols(); ++j) CHECK(a(i, j) == 0.0);
  for (std::size_t t = 0; t < ans.steps.size(); ++t)
    for (std::size_t j = ans.entities() + t + 1; j < a.cols(); ++j) CHECK(a(ans.entities() + t, j) == 0.0);
}

TEST_CASE("copied words are the OCR text byte-for-byte") {
  SynthConfig cfg;
  cfg.scenes = 20;
  cfg.object_dim = 8;
  ModelConfig mc = tiny_config(8, 1, 2);
  mc.object_dim = 8;
  mc.appearance_dim = 8;
  mc.word_dim = 5;
  const auto data = generate_synthetic(cfg, 3).records;
  std::size_t ocr_steps = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Model m(mc, AnswerVocabulary::build(data, 10), WordVocabulary::build(data, 50), seed);
    // Bias the pointer upward so copies actually happen.
    m.fusion().b_ptr_query->value.fill(1.0);
    m.fusion().b_ptr_key->value.fill(1.0);
    for (const auto& r : data) CHECK(copy_exact(r, decode_greedy(r, m), &ocr_steps));
  }
  CHECK(ocr_steps > 0);
}

TEST_CASE("end-to-end gradient check on a tiny model") {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const GradCheckResult rep = full_model_grad_check(seed);
    INFO("worst " << rep.worst_parameter << "[" << rep.worst_index << "] analytic " << rep.analytic << " numeric "
                  << rep.numeric);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("model config validation") {
  ModelConfig cfg = tiny_config(8, 1, 3);
  CHECK_THROWS_AS(tiny_model(1, cfg), ValidationError);
  cfg = tiny_config();
  cfg.max_steps = 0;
  CHECK_THROWS_AS(tiny_model(1, cfg), ValidationError);
  Model m = tiny_model(1);
  CHECK_THROWS_AS(m.set_layers_for_testing(5), ValidationError);
}

TEST_CASE("encoder rejects too many entity rows") {
  ModelConfig cfg = tiny_config();
  cfg.max_objects = 1;
  cfg.max_ocr = 1;
  cfg.max_question = 1;
  Model m = tiny_model(2, cfg);
  Graph g;
  CHECK_THROWS_AS(encode(g, m, g.constant(Tensor({4, 8}))), ValidationError);
}

}  // TEST_SUITE
